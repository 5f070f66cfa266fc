#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "addle/config.hpp"
#include "addle/pipeline.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "addle_out";
  std::string mode = "addle";
};

void add_common(CLI::App* cmd, Options& opt, bool with_mode) {
  cmd->add_option("--config", opt.config, "experiment config file (defaults apply when omitted)");
  cmd->add_option("--seed", opt.seed, "master seed, overrides the config");
  cmd->add_option("--out", opt.out, "output directory")->capture_default_str();
  if (with_mode) {
    cmd->add_option("--mode", opt.mode, "addle, baseline, multi-head or jlsl")
        ->capture_default_str()
        ->check(CLI::IsMember({"addle", "baseline", "multi-head", "jlsl"}));
  }
}

addle::ExperimentConfig resolve(const Options& opt) {
  addle::ExperimentConfig cfg = opt.config.empty() ? addle::ExperimentConfig{} : addle::load_config(opt.config);
  if (opt.seed) cfg.seed = *opt.seed;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent rater embeddings: simulate, train, select and evaluate virtual raters"};
  app.footer("Config file sections and defaults:\n" + addle::config_reference());
  app.require_subcommand(1);
  Options opt;

  auto* gen = app.add_subcommand("gen-data", "simulate a dataset and write the splits");
  auto* train = app.add_subcommand("train", "train one mode on the training split");
  auto* finetune = app.add_subcommand("finetune-raters", "refit per-rater parameters with shared weights frozen");
  auto* greedy = app.add_subcommand("greedy-select", "choose virtual raters on the gold validation split");
  auto* eval = app.add_subcommand("eval", "evaluate a mode on the test split");
  auto* analyze = app.add_subcommand("analyze-latent", "interpolation, PCA and norm analysis of the codes");
  auto* run = app.add_subcommand("run", "every stage for every configured mode");
  for (auto* c : {gen, analyze, run}) add_common(c, opt, false);
  for (auto* c : {train, finetune, greedy, eval}) add_common(c, opt, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  addle::ExperimentConfig cfg;
  try {
    cfg = resolve(opt);
  } catch (const addle::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }

  try {
    addle::Pipeline p(cfg, opt.out);
    const addle::TrainMode mode = addle::parse_mode(opt.mode);
    if (gen->parsed()) {
      p.gen_data();
    } else if (train->parsed()) {
      p.train(mode);
    } else if (finetune->parsed()) {
      if (!addle::supports_finetune(mode)) {
        std::cerr << "finetune-raters: mode '" << opt.mode << "' has no per-rater parameters\n";
        return 2;
      }
      p.finetune(mode);
    } else if (greedy->parsed()) {
      p.greedy_select(mode);
    } else if (eval->parsed()) {
      p.eval(mode);
    } else if (analyze->parsed()) {
      p.analyze_latent();
    } else if (run->parsed()) {
      p.run();
      std::cout << "artifacts written to " << opt.out << "\n";
      return 0;
    }
    p.write_manifest("partial", "stage-by-stage run");
  } catch (const addle::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
