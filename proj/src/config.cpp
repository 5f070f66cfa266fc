#include "addle/config.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>

#include "addle/dataset.hpp"
#include "addle/inference.hpp"

namespace addle {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t to_u64(const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw std::invalid_argument("expected a non-negative integer, got '" + v + "'");
  }
  try {
    return std::stoull(v);
  } catch (const std::out_of_range&) {
    throw std::invalid_argument("integer '" + v + "' is out of range");
  }
}

double to_double(const std::string& v) {
  double d = 0.0;
  try {
    d = parse_double(v);
  } catch (const std::exception&) {
    throw std::invalid_argument("expected a number, got '" + v + "'");
  }
  if (!std::isfinite(d)) throw std::invalid_argument("expected a finite number, got '" + v + "'");
  return d;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("expected true or false, got '" + v + "'");
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

std::string sizes_text(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

struct Field {
  std::string section;
  std::string key;
  std::string description;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <class T>
Field size_field(std::string section, std::string key, std::string doc, T ExperimentConfig::*outer,
                 std::size_t T::*member) {
  return {std::move(section), std::move(key), std::move(doc),
          [=](const ExperimentConfig& c) { return std::to_string(c.*outer.*member); },
          [=](ExperimentConfig& c, const std::string& v) { c.*outer.*member = to_u64(v); }};
}

template <class T>
Field double_field(std::string section, std::string key, std::string doc, T ExperimentConfig::*outer,
                   double T::*member) {
  return {std::move(section), std::move(key), std::move(doc),
          [=](const ExperimentConfig& c) { return format_double(c.*outer.*member); },
          [=](ExperimentConfig& c, const std::string& v) { c.*outer.*member = to_double(v); }};
}

const std::vector<Field>& schema() {
  using C = ExperimentConfig;
  static const std::vector<Field> fields = {
      {"experiment", "seed", "master seed",
       [](const C& c) { return std::to_string(c.seed); }, [](C& c, const std::string& v) { c.seed = to_u64(v); }},
      {"experiment", "modes", "trained modes: addle, baseline, multi-head, jlsl",
       [](const C& c) {
         std::vector<std::string> names;
         for (auto m : c.modes) names.push_back(mode_name(m));
         return join_list(names);
       },
       [](C& c, const std::string& v) {
         c.modes.clear();
         for (const auto& name : split_list(v)) c.modes.push_back(parse_mode(name));
       }},
      {"experiment", "finetune", "refit per-rater parameters after joint training",
       [](const C& c) { return from_bool(c.finetune); }, [](C& c, const std::string& v) { c.finetune = to_bool(v); }},

      size_field("simulator", "num_samples", "images N", &C::simulator, &SimulatorConfig::num_samples),
      size_field("simulator", "num_features", "feature dimension D", &C::simulator, &SimulatorConfig::num_features),
      size_field("simulator", "num_classes", "ordinal classes K", &C::simulator, &SimulatorConfig::num_classes),
      size_field("simulator", "num_raters", "raters R", &C::simulator, &SimulatorConfig::num_raters),
      size_field("simulator", "group_size", "images per study", &C::simulator, &SimulatorConfig::group_size),
      {"simulator", "group_jitter", "per-image feature jitter std",
       [](const C& c) { return format_double(c.simulator.sample.group_jitter); },
       [](C& c, const std::string& v) { c.simulator.sample.group_jitter = to_double(v); }},
      {"simulator", "nonlinearity", "weight of the squared-feature severity term",
       [](const C& c) { return format_double(c.simulator.sample.nonlinearity); },
       [](C& c, const std::string& v) { c.simulator.sample.nonlinearity = to_double(v); }},
      {"simulator", "sigma_delta", "threshold shift std",
       [](const C& c) { return format_double(c.simulator.population.sigma_delta); },
       [](C& c, const std::string& v) { c.simulator.population.sigma_delta = to_double(v); }},
      {"simulator", "sigma_w", "image-dependent bias scale",
       [](const C& c) { return format_double(c.simulator.population.sigma_w); },
       [](C& c, const std::string& v) { c.simulator.population.sigma_w = to_double(v); }},
      {"simulator", "sigma_eps", "rater noise scale",
       [](const C& c) { return format_double(c.simulator.population.sigma_eps); },
       [](C& c, const std::string& v) { c.simulator.population.sigma_eps = to_double(v); }},
      {"simulator", "planted_oracle", "replace one rater by a near-oracle",
       [](const C& c) { return from_bool(c.simulator.population.planted_oracle); },
       [](C& c, const std::string& v) { c.simulator.population.planted_oracle = to_bool(v); }},
      {"simulator", "oracle_rater", "index of the planted rater",
       [](const C& c) { return std::to_string(c.simulator.population.oracle_rater); },
       [](C& c, const std::string& v) { c.simulator.population.oracle_rater = to_u64(v); }},
      {"simulator", "oracle_noise", "noise std of the planted rater",
       [](const C& c) { return format_double(c.simulator.population.oracle_noise); },
       [](C& c, const std::string& v) { c.simulator.population.oracle_noise = to_double(v); }},
      {"simulator", "assignment", "rater per study: uniform or power-law",
       [](const C& c) { return std::string(c.simulator.assignment == Assignment::uniform ? "uniform" : "power-law"); },
       [](C& c, const std::string& v) {
         if (v == "uniform") {
           c.simulator.assignment = Assignment::uniform;
         } else if (v == "power-law" || v == "power_law") {
           c.simulator.assignment = Assignment::power_law;
         } else {
           throw std::invalid_argument("expected uniform or power-law, got '" + v + "'");
         }
       }},
      double_field("simulator", "power_law_exponent", "P(r) ~ (r+1)^-a", &C::simulator,
                   &SimulatorConfig::power_law_exponent),

      {"backbone", "hidden", "hidden layer widths",
       [](const C& c) { return sizes_text(c.backbone.hidden); },
       [](C& c, const std::string& v) {
         c.backbone.hidden.clear();
         for (const auto& w : split_list(v)) c.backbone.hidden.push_back(to_u64(w));
       }},
      {"backbone", "latent_dim", "latent code size M",
       [](const C& c) { return std::to_string(c.backbone.latent_dim); },
       [](C& c, const std::string& v) { c.backbone.latent_dim = to_u64(v); }},
      {"backbone", "injections", "injection points <layer>:<dense|spatial>, comma separated",
       [](const C& c) { return format_injections(c.backbone.injections); },
       [](C& c, const std::string& v) { c.backbone.injections = parse_injections(v); }},
      {"backbone", "conv", "conv front-end <channels>,<kernel>; empty for none",
       [](const C& c) {
         return c.backbone.conv ? std::to_string(c.backbone.conv->channels) + "," + std::to_string(c.backbone.conv->kernel)
                                : std::string();
       },
       [](C& c, const std::string& v) {
         const auto parts = split_list(v);
         if (parts.empty()) {
           c.backbone.conv.reset();
           return;
         }
         if (parts.size() != 2) throw std::invalid_argument("expected <channels>,<kernel>, got '" + v + "'");
         c.backbone.conv = ConvFrontEnd{to_u64(parts[0]), to_u64(parts[1])};
       }},

      double_field("train", "learning_rate", "step size", &C::train, &TrainConfig::learning_rate),
      size_field("train", "batch_size", "minibatch size", &C::train, &TrainConfig::batch_size),
      size_field("train", "max_epochs", "epoch budget", &C::train, &TrainConfig::max_epochs),
      size_field("train", "patience", "early-stop patience in epochs", &C::train, &TrainConfig::patience),
      {"train", "optimizer", "sgd or momentum",
       [](const C& c) { return std::string(c.train.optimizer == Optimizer::sgd ? "sgd" : "momentum"); },
       [](C& c, const std::string& v) {
         if (v == "sgd") {
           c.train.optimizer = Optimizer::sgd;
         } else if (v == "momentum") {
           c.train.optimizer = Optimizer::momentum;
         } else {
           throw std::invalid_argument("expected sgd or momentum, got '" + v + "'");
         }
       }},
      double_field("train", "momentum", "momentum coefficient", &C::train, &TrainConfig::momentum),
      double_field("train", "sigma2", "prior variance of the codes", &C::train, &TrainConfig::sigma2),
      size_field("train", "finetune_iterations", "line-search iterations per rater", &C::train,
                 &TrainConfig::finetune_iterations),

      double_field("split", "train", "training fraction", &C::split, &SplitConfig::train),
      double_field("split", "val_stop", "early-stopping fraction (subjective labels)", &C::split,
                   &SplitConfig::val_stop),
      double_field("split", "val_gold", "selection fraction (gold labels)", &C::split, &SplitConfig::val_gold),
      double_field("split", "test", "test fraction (gold labels)", &C::split, &SplitConfig::test),

      double_field("eval", "fpr_max", "partial AUC false-positive bound", &C::eval, &EvalConfig::fpr_max),
      {"eval", "selection_metric", "greedy selection metric: jt or pauc<k>",
       [](const C& c) { return c.eval.selection_metric; },
       [](C& c, const std::string& v) { c.eval.selection_metric = v; }},
      {"eval", "study_level", "average scores per study before scoring",
       [](const C& c) { return from_bool(c.eval.study_level); },
       [](C& c, const std::string& v) { c.eval.study_level = to_bool(v); }},

      {"analysis", "interp_from", "first interpolation endpoint (rater id)",
       [](const C& c) { return c.analysis.interp_from; },
       [](C& c, const std::string& v) { c.analysis.interp_from = v; }},
      {"analysis", "interp_to", "second interpolation endpoint (rater id)",
       [](const C& c) { return c.analysis.interp_to; }, [](C& c, const std::string& v) { c.analysis.interp_to = v; }},
      double_field("analysis", "alpha_min", "interpolation grid start", &C::analysis, &AnalysisConfig::alpha_min),
      double_field("analysis", "alpha_max", "interpolation grid end", &C::analysis, &AnalysisConfig::alpha_max),
      size_field("analysis", "alpha_steps", "interpolation grid size", &C::analysis, &AnalysisConfig::alpha_steps),
      size_field("analysis", "sweep_component", "principal component swept", &C::analysis,
                 &AnalysisConfig::sweep_component),
      size_field("analysis", "sweep_steps", "component sweep grid size", &C::analysis, &AnalysisConfig::sweep_steps),
  };
  return fields;
}

[[noreturn]] void fail(const std::string& field, const std::string& msg) { throw ConfigError(field + ": " + msg); }

}  // namespace

void ExperimentConfig::validate() const {
  const auto& s = simulator;
  if (s.num_samples < 1) fail("simulator.num_samples", "must be at least 1");
  if (s.num_features < 1) fail("simulator.num_features", "must be at least 1");
  if (s.num_classes < 2) fail("simulator.num_classes", "must be at least 2");
  if (s.num_raters < 1) fail("simulator.num_raters", "must be at least 1");
  if (s.group_size < 1) fail("simulator.group_size", "must be at least 1");
  if (s.sample.group_jitter < 0) fail("simulator.group_jitter", "must be non-negative");
  if (s.population.sigma_delta < 0) fail("simulator.sigma_delta", "must be non-negative");
  if (s.population.sigma_w < 0) fail("simulator.sigma_w", "must be non-negative");
  if (s.population.sigma_eps < 0) fail("simulator.sigma_eps", "must be non-negative");
  if (s.population.oracle_noise < 0) fail("simulator.oracle_noise", "must be non-negative");
  if (s.population.planted_oracle && s.population.oracle_rater >= s.num_raters) {
    fail("simulator.oracle_rater", "must be below num_raters (" + std::to_string(s.num_raters) + ")");
  }
  if (s.power_law_exponent < 0) fail("simulator.power_law_exponent", "must be non-negative");

  if (modes.empty()) fail("experiment.modes", "at least one mode is required");
  std::set<TrainMode> seen;
  for (auto m : modes)
    if (!seen.insert(m).second) fail("experiment.modes", "mode '" + mode_name(m) + "' listed twice");

  BackboneConfig bb = backbone;
  bb.input_dim = s.num_features;
  bb.num_classes = s.num_classes;
  try {
    bb.validate();
  } catch (const std::invalid_argument& e) {
    fail("backbone", e.what());
  }
  try {
    train.validate();
  } catch (const std::invalid_argument& e) {
    fail("train", e.what());
  }
  if (train.max_epochs < 1) fail("train.max_epochs", "must be at least 1");

  const double fractions[] = {split.train, split.val_stop, split.val_gold, split.test};
  const char* names[] = {"split.train", "split.val_stop", "split.val_gold", "split.test"};
  double total = 0.0;
  for (int i = 0; i < 4; ++i) {
    if (!(fractions[i] > 0.0)) fail(names[i], "must be positive");
    total += fractions[i];
  }
  if (std::abs(total - 1.0) > 1e-9) fail("split", "fractions sum to " + format_double(total) + ", expected 1");

  if (!(eval.fpr_max > 0.0 && eval.fpr_max <= 1.0)) fail("eval.fpr_max", "must lie in (0, 1]");
  try {
    validate_metric(eval.selection_metric, s.num_classes);
  } catch (const std::invalid_argument& e) {
    fail("eval.selection_metric", e.what());
  }
  if (analysis.alpha_steps < 1) fail("analysis.alpha_steps", "must be at least 1");
  if (analysis.sweep_steps < 1) fail("analysis.sweep_steps", "must be at least 1");
  if (backbone.latent_dim > 0 && analysis.sweep_component >= backbone.latent_dim) {
    fail("analysis.sweep_component", "must be below latent_dim (" + std::to_string(backbone.latent_dim) + ")");
  }
}

std::string ExperimentConfig::canonical_text() const {
  std::string out;
  for (const auto& f : schema()) out += f.section + "." + f.key + " = " + f.get(*this) + "\n";
  return out;
}

std::string ExperimentConfig::hash() const { return sha256_hex(canonical_text()); }

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::set<std::string> assigned;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = source + ":" + std::to_string(lineno) + ": ";
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      bool known = false;
      for (const auto& f : schema()) known = known || f.section == section;
      if (!known) throw ConfigError(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    if (section.empty()) throw ConfigError(where + "key outside of any [section]");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string name = section + "." + key;
    const Field* field = nullptr;
    for (const auto& f : schema())
      if (f.section == section && f.key == key) field = &f;
    if (!field) throw ConfigError(where + "unknown key '" + name + "'");
    if (!assigned.insert(name).second) throw ConfigError(where + name + ": assigned twice");
    try {
      field->set(cfg, value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where + name + ": " + e.what());
    }
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string config_reference() {
  const ExperimentConfig defaults;
  std::ostringstream out;
  std::string section;
  for (const auto& f : schema()) {
    if (f.section != section) {
      section = f.section;
      out << "[" << section << "]\n";
    }
    std::string value = f.get(defaults);
    if (value.empty()) value = "(empty)";
    double number = 0.0;
    const auto parsed = std::from_chars(value.data(), value.data() + value.size(), number);
    if (parsed.ec == std::errc() && parsed.ptr == value.data() + value.size()) {
      char buf[40];
      value.assign(buf, std::to_chars(buf, buf + sizeof buf, number).ptr);
    }
    out << "  " << std::left << std::setw(20) << f.key << std::setw(std::max<int>(30, static_cast<int>(value.size()) + 2)) << value << f.description << "\n";
  }
  return out.str();
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open for hashing");
  std::stringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

}  // namespace addle
