#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "addle/backbone.hpp"
#include "addle/rater_sim.hpp"
#include "addle/trainer.hpp"

namespace addle {

// Invalid configuration. The message names the field, and the line when parsed from text.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SimulatorConfig {
  std::size_t num_samples = 4000;
  std::size_t num_features = 16;
  std::size_t num_classes = 4;
  std::size_t num_raters = 8;
  std::size_t group_size = 4;
  SampleOptions sample;
  PopulationHyper population{0.5, 0.3, 0.3, true, 3, 0.1};
  Assignment assignment = Assignment::uniform;
  double power_law_exponent = 1.0;
};

struct SplitConfig {
  double train = 0.7;
  double val_stop = 0.1;
  double val_gold = 0.1;
  double test = 0.1;
};

struct EvalConfig {
  double fpr_max = 0.30;
  std::string selection_metric = "jt";
  bool study_level = true;
};

struct AnalysisConfig {
  // Interpolation endpoints by rater id; empty picks the first and last rater.
  std::string interp_from;
  std::string interp_to;
  double alpha_min = 0.0;
  double alpha_max = 1.0;
  std::size_t alpha_steps = 11;
  std::size_t sweep_component = 0;
  std::size_t sweep_steps = 11;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::vector<TrainMode> modes = {TrainMode::baseline, TrainMode::addle, TrainMode::multi_head, TrainMode::jlsl};
  bool finetune = true;
  SimulatorConfig simulator;
  BackboneConfig backbone;  // input_dim and num_classes follow the simulator
  TrainConfig train;
  SplitConfig split;
  EvalConfig eval;
  AnalysisConfig analysis;

  // Throws ConfigError naming the offending field.
  void validate() const;
  // Every field in schema order, one "section.key = value" per line.
  std::string canonical_text() const;
  // SHA-256 hex digest of canonical_text().
  std::string hash() const;
};

// "[section]" headers and "key = value" lines; '#' starts a comment. Unknown
// sections or keys and malformed values are rejected with "<source>:<line>".
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

// Documented schema: "section.key  default  description" lines.
std::string config_reference();

std::string sha256_hex(const std::string& data);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace addle
