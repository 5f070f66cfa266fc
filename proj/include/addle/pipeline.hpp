#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "addle/checkpoint.hpp"
#include "addle/config.hpp"
#include "addle/inference.hpp"
#include "addle/latent_analysis.hpp"
#include "addle/metrics.hpp"
#include "addle/trainer.hpp"

namespace addle {

struct Splits {
  Dataset all;
  Dataset train;
  Dataset val_stop;  // early stopping, subjective labels
  Dataset val_gold;  // rater selection, gold labels
  Dataset test;
};

// Per-stage seeds expanded from the master seed.
std::uint64_t stage_seed(const ExperimentConfig& cfg, std::uint64_t stream, std::uint64_t sub = 0);

Dataset simulate_dataset(const ExperimentConfig& cfg);
// Whole studies go to one split; studies are shuffled, then cut by the fractions.
Splits split_dataset(Dataset all, const SplitConfig& split, std::uint64_t seed);
Splits make_splits(const ExperimentConfig& cfg);

BackboneConfig experiment_backbone(const ExperimentConfig& cfg);
TrainConfig experiment_train_config(const ExperimentConfig& cfg, TrainMode mode);
TrainResult train_mode(const ExperimentConfig& cfg, const Splits& splits, TrainMode mode);
bool supports_finetune(TrainMode mode);

struct VariantReport {
  std::string name;  // "mean" or "greedy"
  std::vector<std::string> raters;
  EvaluationReport report;
};

struct ModeEvaluation {
  TrainMode mode = TrainMode::addle;
  std::vector<VariantReport> variants;
  std::vector<std::pair<std::string, double>> rater_jt;  // per virtual rater, test set
};

ModeEvaluation evaluate_mode(const ExperimentConfig& cfg, const RaterModel& model, const VirtualRaterSet* greedy,
                             const Dataset& test);

// Analytic parameter counts per mode for R raters.
std::map<std::string, std::size_t> analytic_parameter_counts(const BackboneConfig& backbone, std::size_t raters);

// On-disk stages under an output directory.
class Pipeline {
 public:
  Pipeline(ExperimentConfig cfg, std::filesystem::path out);

  void gen_data();
  void train(TrainMode mode);
  void finetune(TrainMode mode);
  void greedy_select(TrainMode mode);
  void eval(TrainMode mode);
  void analyze_latent();
  void parameter_report();
  // Every configured stage in order; the manifest records a failure before rethrowing.
  void run();
  // Lists every artifact with its SHA-256; status is "complete" or "partial".
  void write_manifest(const std::string& status, const std::string& detail = "");

  const std::filesystem::path& out() const { return out_; }

 private:
  Splits load_splits() const;
  RaterModel load_for_inference(TrainMode mode) const;
  Provenance provenance(std::uint64_t epoch) const;

  ExperimentConfig cfg_;
  std::filesystem::path out_;
};

}  // namespace addle
