#include "addle/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "addle/checkpoint.hpp"
#include "addle/rater_sim.hpp"
#include "addle/seeds.hpp"

namespace addle {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_json(const fs::path& path, const ordered_json& j) { write_text(path, j.dump(2) + "\n"); }

ordered_json number(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

ordered_json report_json(const EvaluationReport& r) {
  ordered_json j;
  j["jt"] = number(r.jt);
  j["fpr_max"] = r.fpr_max;
  ordered_json cuts = ordered_json::array();
  for (const auto& c : r.cutoffs) {
    ordered_json roc = ordered_json::array();
    for (const auto& p : c.roc) roc.push_back({p.fpr, p.tpr});
    cuts.push_back({{"cutoff", c.cutoff}, {"auc", number(c.auc)}, {"partial_auc", number(c.partial_auc)}, {"roc", roc}});
  }
  j["cutoffs"] = cuts;
  return j;
}

std::string roc_tsv(const std::vector<RocPoint>& roc) {
  std::string out = "fpr\ttpr\n";
  for (const auto& p : roc) out += format_double(p.fpr) + "\t" + format_double(p.tpr) + "\n";
  return out;
}

std::string mode_file(TrainMode m) { return mode_name(m); }

std::vector<std::string> all_rater_ids(const fs::path& data_dir) {
  const auto meta = read_metadata(data_dir / "all.csv.meta");
  const auto it = meta.find("rater_ids");
  if (it == meta.end()) throw std::runtime_error((data_dir / "all.csv.meta").string() + ": lacks rater_ids");
  return split_list(it->second);
}

}  // namespace

std::uint64_t stage_seed(const ExperimentConfig& cfg, std::uint64_t stream_id, std::uint64_t sub) {
  return derive_seed(derive_seed(cfg.seed, stream_id), sub);
}

Dataset simulate_dataset(const ExperimentConfig& cfg) {
  const auto& s = cfg.simulator;
  const GroundTruth truth = gen_samples(s.num_samples, s.num_features, s.num_classes, s.group_size,
                                        stage_seed(cfg, stream::simulate, 0), s.sample);
  const auto population =
      gen_population(s.num_raters, s.num_features, truth.thresholds, s.population, stage_seed(cfg, stream::simulate, 1));
  const std::size_t groups = truth.samples.empty() ? 0 : static_cast<std::size_t>(truth.samples.back().group_id) + 1;
  const auto assignment =
      assign_raters(groups, s.num_raters, s.assignment, s.power_law_exponent, stage_seed(cfg, stream::simulate, 2));
  return label_samples(truth, population, assignment, stage_seed(cfg, stream::simulate, 3));
}

Splits split_dataset(Dataset all, const SplitConfig& split, std::uint64_t seed) {
  std::vector<std::int64_t> groups;
  for (const auto& s : all.samples)
    if (groups.empty() || std::find(groups.begin(), groups.end(), s.group_id) == groups.end()) groups.push_back(s.group_id);
  std::sort(groups.begin(), groups.end());
  Rng rng = make_rng(seed);
  std::shuffle(groups.begin(), groups.end(), rng);

  const double cuts[] = {split.train, split.train + split.val_stop, split.train + split.val_stop + split.val_gold};
  std::map<std::int64_t, int> part;
  const double g = static_cast<double>(groups.size());
  for (std::size_t i = 0; i < groups.size(); ++i) {
    int p = 3;
    for (int c = 2; c >= 0; --c)
      if (static_cast<double>(i) < std::round(cuts[c] * g)) p = c;
    part[groups[i]] = p;
  }
  std::vector<std::size_t> rows[4];
  for (std::size_t i = 0; i < all.size(); ++i) rows[part.at(all.samples[i].group_id)].push_back(i);
  Splits out;
  out.train = all.subset(rows[0]);
  out.val_stop = all.subset(rows[1]);
  out.val_gold = all.subset(rows[2]);
  out.test = all.subset(rows[3]);
  out.all = std::move(all);
  return out;
}

Splits make_splits(const ExperimentConfig& cfg) {
  return split_dataset(simulate_dataset(cfg), cfg.split, stage_seed(cfg, stream::split));
}

BackboneConfig experiment_backbone(const ExperimentConfig& cfg) {
  BackboneConfig bb = cfg.backbone;
  bb.input_dim = cfg.simulator.num_features;
  bb.num_classes = cfg.simulator.num_classes;
  return bb;
}

TrainConfig experiment_train_config(const ExperimentConfig& cfg, TrainMode mode) {
  TrainConfig tc = cfg.train;
  tc.mode = mode;
  tc.seed = stage_seed(cfg, stream::train);
  return tc;
}

TrainResult train_mode(const ExperimentConfig& cfg, const Splits& splits, TrainMode mode) {
  return train_joint(splits.train, splits.val_stop, experiment_backbone(cfg), experiment_train_config(cfg, mode));
}

bool supports_finetune(TrainMode mode) { return mode == TrainMode::addle || mode == TrainMode::multi_head; }

ModeEvaluation evaluate_mode(const ExperimentConfig& cfg, const RaterModel& model, const VirtualRaterSet* greedy,
                             const Dataset& test) {
  const std::size_t k = model.backbone.num_classes;
  const Tensor x = test.feature_matrix();
  const auto scores = score_matrix(model, x);
  ModeEvaluation ev;
  ev.mode = model.mode;
  std::vector<std::size_t> all(model.num_raters());
  std::iota(all.begin(), all.end(), 0);
  ev.variants.push_back({"mean", model.rater_ids,
                         evaluate_scores(average_scores(scores, all), test, k, cfg.eval.study_level, cfg.eval.fpr_max)});
  if (greedy) {
    VariantReport v{"greedy", {}, {}};
    for (auto r : greedy->raters) v.raters.push_back(model.rater_ids.at(r));
    v.report = evaluate_scores(average_scores(scores, greedy->raters), test, k, cfg.eval.study_level, cfg.eval.fpr_max);
    ev.variants.push_back(std::move(v));
  }
  for (std::size_t r = 0; r < model.num_raters(); ++r) {
    ev.rater_jt.emplace_back(model.rater_ids[r],
                             evaluate_scores(scores[r], test, k, cfg.eval.study_level, cfg.eval.fpr_max).jt);
  }
  return ev;
}

std::map<std::string, std::size_t> analytic_parameter_counts(const BackboneConfig& backbone, std::size_t raters) {
  BackboneConfig plain = without_injections(backbone);
  plain.num_heads = 1;
  const std::size_t base = parameter_count(plain);
  BackboneConfig heads = plain;
  heads.num_heads = raters;
  BackboneConfig latent = backbone;
  latent.num_heads = 1;
  std::map<std::string, std::size_t> out;
  out["baseline"] = base;
  out["addle"] = backbone.has_injections() ? parameter_count(latent) + raters * backbone.latent_dim : base;
  out["multi-head"] = parameter_count(heads);
  out["jlsl"] = raters * base;
  return out;
}

Pipeline::Pipeline(ExperimentConfig cfg, fs::path out) : cfg_(std::move(cfg)), out_(std::move(out)) {
  cfg_.validate();
}

Provenance Pipeline::provenance(std::uint64_t epoch) const { return {cfg_.hash(), cfg_.seed, epoch}; }

void Pipeline::gen_data() {
  const Splits s = make_splits(cfg_);
  const fs::path dir = out_ / "data";
  fs::create_directories(dir);
  std::map<std::string, std::string> meta;
  const auto& sim = cfg_.simulator;
  meta["num_features"] = std::to_string(sim.num_features);
  meta["num_classes"] = std::to_string(sim.num_classes);
  meta["num_raters"] = std::to_string(sim.num_raters);
  meta["rater_ids"] = join_list(s.all.rater_ids);
  meta["master_seed"] = std::to_string(cfg_.seed);
  meta["simulate_seed"] = std::to_string(derive_seed(cfg_.seed, stream::simulate));
  meta["split_seed"] = std::to_string(stage_seed(cfg_, stream::split));
  meta["config_hash"] = cfg_.hash();
  const std::string canonical = cfg_.canonical_text();
  std::size_t start = 0;
  while (start < canonical.size()) {
    const std::size_t end = canonical.find('\n', start);
    const std::string line = canonical.substr(start, end - start);
    start = end + 1;
    const std::size_t eq = line.find(" = ");
    const std::string key = line.substr(0, eq);
    if (key.rfind("simulator.", 0) == 0 || key.rfind("split.", 0) == 0) meta[key] = line.substr(eq + 3);
  }
  emit_dataset(s.all, dir / "all.csv", meta);
  write_dataset_csv(s.train, dir / "train.csv");
  write_dataset_csv(s.val_stop, dir / "val_stop.csv");
  write_dataset_csv(s.val_gold, dir / "val_gold.csv");
  write_dataset_csv(s.test, dir / "test.csv");
}

Splits Pipeline::load_splits() const {
  const fs::path dir = out_ / "data";
  const auto ids = all_rater_ids(dir);
  Splits s;
  s.train = read_dataset_csv(dir / "train.csv", ids);
  s.val_stop = read_dataset_csv(dir / "val_stop.csv", ids);
  s.val_gold = read_dataset_csv(dir / "val_gold.csv", ids);
  s.test = read_dataset_csv(dir / "test.csv", ids);
  for (Dataset* d : {&s.train, &s.val_stop, &s.val_gold, &s.test}) {
    if (d->rater_ids != ids) throw std::runtime_error("dataset split lists raters absent from all.csv.meta");
    d->num_features = cfg_.simulator.num_features;
    d->validate(cfg_.simulator.num_classes);
  }
  return s;
}

void Pipeline::train(TrainMode mode) {
  const Splits s = load_splits();
  const TrainResult res = train_mode(cfg_, s, mode);
  const std::uint64_t epoch = *std::max_element(res.best_epochs.begin(), res.best_epochs.end());
  save_model(res.model, provenance(epoch), out_ / "models", mode_file(mode));
  std::string log = "network\tepoch\ttrain_objective\tval_jt\n";
  for (std::size_t n = 0; n < res.logs.size(); ++n)
    for (const auto& e : res.logs[n])
      log += std::to_string(n) + "\t" + std::to_string(e.epoch) + "\t" + format_double(e.train_objective) + "\t" +
             format_double(e.val_jt) + "\n";
  write_text(out_ / "logs" / (mode_file(mode) + "_train.tsv"), log);
}

void Pipeline::finetune(TrainMode mode) {
  if (!supports_finetune(mode)) return;
  Provenance prov;
  const RaterModel model = load_model(out_ / "models", mode_file(mode), &prov);
  const Splits s = load_splits();
  const FinetuneResult res = finetune_raters(model, s.train, experiment_train_config(cfg_, mode));
  save_model(res.model, prov, out_ / "models", mode_file(mode) + "_finetuned");
  std::string log = "rater_id\tsamples\tbefore\tafter\titerations\n";
  for (const auto& r : res.raters)
    log += r.rater_id + "\t" + std::to_string(r.samples) + "\t" + format_double(r.before) + "\t" +
           format_double(r.after) + "\t" + std::to_string(r.iterations) + "\n";
  for (const auto& w : res.warnings) log += "# warning: " + w + "\n";
  write_text(out_ / "logs" / (mode_file(mode) + "_finetune.tsv"), log);
}

RaterModel Pipeline::load_for_inference(TrainMode mode) const {
  const fs::path dir = out_ / "models";
  const std::string tuned = mode_file(mode) + "_finetuned";
  if (cfg_.finetune && supports_finetune(mode) && fs::exists(dir / (tuned + ".ckpt"))) return load_model(dir, tuned);
  return load_model(dir, mode_file(mode));
}

void Pipeline::greedy_select(TrainMode mode) {
  const RaterModel model = load_for_inference(mode);
  const Splits s = load_splits();
  const VirtualRaterSet set =
      addle::greedy_select(model, s.val_gold, cfg_.eval.selection_metric, cfg_.eval.fpr_max, cfg_.eval.study_level);
  ordered_json j;
  j["mode"] = mode_name(mode);
  j["metric"] = set.metric;
  j["study_level"] = cfg_.eval.study_level;
  ordered_json raters = ordered_json::array();
  for (auto r : set.raters) raters.push_back(model.rater_ids[r]);
  j["raters"] = raters;
  j["step_scores"] = set.step_scores;
  write_json(out_ / "selection" / (mode_file(mode) + "_greedy.json"), j);
}

void Pipeline::eval(TrainMode mode) {
  const RaterModel model = load_for_inference(mode);
  const Splits s = load_splits();
  std::optional<VirtualRaterSet> set;
  const fs::path sel = out_ / "selection" / (mode_file(mode) + "_greedy.json");
  if (mode != TrainMode::baseline && fs::exists(sel)) {
    const auto j = ordered_json::parse(read_text(sel));
    set.emplace();
    set->metric = j.at("metric").get<std::string>();
    for (const auto& id : j.at("raters")) {
      const auto idx = model.index_of(id.get<std::string>());
      if (!idx) throw std::runtime_error(sel.string() + ": unknown rater '" + id.get<std::string>() + "'");
      set->raters.push_back(*idx);
    }
    set->step_scores = j.at("step_scores").get<std::vector<double>>();
  }
  const ModeEvaluation ev = evaluate_mode(cfg_, model, set ? &*set : nullptr, s.test);
  ordered_json j;
  j["mode"] = mode_name(mode);
  j["config_hash"] = cfg_.hash();
  j["study_level"] = cfg_.eval.study_level;
  j["parameters"] = model.parameter_count();
  ordered_json variants = ordered_json::object();
  for (const auto& v : ev.variants) {
    ordered_json vj = report_json(v.report);
    vj["raters"] = v.raters;
    variants[v.name] = vj;
    for (const auto& c : v.report.cutoffs) {
      if (c.roc.empty()) continue;
      write_text(out_ / "plots" / (mode_file(mode) + "_" + v.name + "_roc" + std::to_string(c.cutoff) + ".tsv"),
                 roc_tsv(c.roc));
    }
  }
  j["variants"] = variants;
  ordered_json raters = ordered_json::array();
  for (const auto& [id, jt] : ev.rater_jt) raters.push_back({{"rater_id", id}, {"test_jt", number(jt)}});
  j["virtual_raters"] = raters;
  write_json(out_ / "reports" / (mode_file(mode) + ".json"), j);
}

void Pipeline::analyze_latent() {
  const RaterModel model = load_for_inference(TrainMode::addle);
  if (!model.codebook) throw std::runtime_error("analyze-latent: the addle model has no latent codes");
  const Splits s = load_splits();
  const Tensor x = s.test.feature_matrix();
  const auto gold = s.test.gold_labels();
  const LatentCodebook& cb = *model.codebook;
  const fs::path dir = out_ / "analysis";

  const std::string from = cfg_.analysis.interp_from.empty() ? cb.rater_ids().front() : cfg_.analysis.interp_from;
  const std::string to = cfg_.analysis.interp_to.empty() ? cb.rater_ids().back() : cfg_.analysis.interp_to;
  const auto z0 = cb.code(cb.require_index(from));
  const auto z1 = cb.code(cb.require_index(to));
  std::vector<std::vector<double>> path;
  const auto alphas = linear_grid(cfg_.analysis.alpha_min, cfg_.analysis.alpha_max, cfg_.analysis.alpha_steps);
  for (double a : alphas) path.push_back(interpolate(z0, z1, a));
  const auto curve = performance_curve(model, path, x, gold);
  std::string interp = "alpha\tjt\n";
  for (std::size_t i = 0; i < alphas.size(); ++i) interp += format_double(alphas[i]) + "\t" + format_double(curve[i]) + "\n";
  write_text(dir / "interpolation.tsv", interp);

  ordered_json summary;
  summary["interpolation"] = {{"from", from}, {"to", to}, {"from_jt", code_jt(model, z0, x, gold)},
                              {"to_jt", code_jt(model, z1, x, gold)}};

  std::string norms = "rater_id\tnorm\n";
  ordered_json norm_json = ordered_json::array();
  for (const auto& [id, n] : code_norms(cb)) {
    norms += id + "\t" + format_double(n) + "\n";
    norm_json.push_back({{"rater_id", id}, {"norm", n}});
  }
  write_text(dir / "code_norms.tsv", norms);
  summary["code_norms"] = norm_json;

  if (cb.num_raters() >= 2) {
    const PcaBasis basis = pca(cb.codes());
    std::string spectrum = "component\teigenvalue\tratio\n";
    for (std::size_t c = 0; c < basis.eigenvalues.size(); ++c)
      spectrum += std::to_string(c) + "\t" + format_double(basis.eigenvalues[c]) + "\t" +
                  format_double(basis.explained_ratio[c]) + "\n";
    write_text(dir / "pca_spectrum.tsv", spectrum);
    summary["explained_ratio"] = basis.explained_ratio;

    const std::size_t c = cfg_.analysis.sweep_component;
    const auto [lo, hi] = projection_range(basis, cb.codes(), c);
    const auto lambdas = linear_grid(lo, hi, cfg_.analysis.sweep_steps);
    std::string sweep = "lambda\tjt\n";
    for (const auto& p : component_sweep(model, basis, c, lambdas, x, gold))
      sweep += format_double(p.lambda) + "\t" + format_double(p.jt) + "\n";
    write_text(dir / "sweep.tsv", sweep);
    summary["sweep"] = {{"component", c}, {"lambda_min", lo}, {"lambda_max", hi}};

    std::string scatter = "rater_id\tpc0\tpc1\tjt\n";
    for (std::size_t r = 0; r < cb.num_raters(); ++r) {
      const auto p = basis.project(cb.code(r));
      scatter += cb.rater_ids()[r] + "\t" + format_double(p[0]) + "\t" + format_double(p.size() > 1 ? p[1] : 0.0) +
                 "\t" + format_double(code_jt(model, cb.code(r), x, gold)) + "\n";
    }
    write_text(dir / "pca_scatter.tsv", scatter);
  }
  write_json(dir / "summary.json", summary);
}

void Pipeline::parameter_report() {
  ordered_json j;
  const auto counts = analytic_parameter_counts(experiment_backbone(cfg_), cfg_.simulator.num_raters);
  for (auto m : cfg_.modes) j[mode_name(m)] = counts.at(mode_name(m));
  write_json(out_ / "reports" / "parameters.json", j);
}

void Pipeline::write_manifest(const std::string& status, const std::string& detail) {
  std::vector<fs::path> files;
  if (fs::exists(out_)) {
    for (const auto& e : fs::recursive_directory_iterator(out_))
      if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(fs::relative(e.path(), out_));
  }
  std::sort(files.begin(), files.end());
  ordered_json j;
  j["status"] = status;
  if (!detail.empty()) j["detail"] = detail;
  j["config_hash"] = cfg_.hash();
  j["seed"] = cfg_.seed;
  ordered_json list = ordered_json::array();
  for (const auto& f : files)
    list.push_back({{"path", f.generic_string()}, {"bytes", fs::file_size(out_ / f)}, {"sha256", sha256_file(out_ / f)}});
  j["artifacts"] = list;
  write_json(out_ / "manifest.json", j);
}

void Pipeline::run() {
  std::string stage = "gen-data";
  try {
    write_text(out_ / "config.resolved", cfg_.canonical_text());
    gen_data();
    for (auto m : cfg_.modes) {
      stage = "train " + mode_name(m);
      train(m);
      if (cfg_.finetune && supports_finetune(m)) {
        stage = "finetune-raters " + mode_name(m);
        finetune(m);
      }
      if (m != TrainMode::baseline) {
        stage = "greedy-select " + mode_name(m);
        greedy_select(m);
      }
      stage = "eval " + mode_name(m);
      eval(m);
    }
    stage = "parameter report";
    parameter_report();
    if (std::find(cfg_.modes.begin(), cfg_.modes.end(), TrainMode::addle) != cfg_.modes.end() &&
        cfg_.backbone.latent_dim > 0 && !cfg_.backbone.injections.empty()) {
      stage = "analyze-latent";
      analyze_latent();
    }
  } catch (const std::exception& e) {
    write_manifest("partial", "stage '" + stage + "' failed: " + e.what());
    throw;
  }
  write_manifest("complete");
}

}  // namespace addle
