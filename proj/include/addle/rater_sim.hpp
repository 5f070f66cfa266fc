#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "addle/dataset.hpp"
#include "addle/seeds.hpp"

namespace addle {

struct GroundTruthSample {
  std::vector<double> features;
  double severity = 0.0;
  int true_label = 0;
  std::int64_t group_id = 0;
};

struct GroundTruth {
  std::vector<GroundTruthSample> samples;
  std::vector<double> thresholds;  // K-1 population thresholds, increasing
  std::vector<double> direction;   // unit vector u, severity = u . x_group
  std::size_t num_features = 0;
  std::size_t num_classes = 0;
};

struct SampleOptions {
  // Std of the per-image feature jitter around the shared study features.
  double group_jitter = 0.1;
  // Weight of the squared-feature term added to the linear severity.
  double nonlinearity = 0.0;
};

// Draws studies of `group_size` images. Study features x_g ~ N(0, I_D) fix the
// severity s = u . x_g (+ optional squared term); images get x_g plus jitter.
// Thresholds are empirical severity quantiles, so classes come out balanced.
GroundTruth gen_samples(std::size_t num_samples, std::size_t num_features, std::size_t num_classes,
                        std::size_t group_size, std::uint64_t seed, const SampleOptions& options = {});

struct RaterProfile {
  std::string id;
  std::vector<double> threshold_shift;  // delta_r, one per threshold
  std::vector<double> feature_weights;  // w_r, image-dependent bias
  double noise = 0.0;                   // s_r
};

// Perceived severity s + w_r . x + eps (eps ~ N(0, s_r^2)); the label counts the
// perceived thresholds tau_k + delta_rk strictly below it.
int rate(const GroundTruthSample& sample, const RaterProfile& profile, const std::vector<double>& thresholds, Rng& rng);

struct PopulationHyper {
  double sigma_delta = 0.5;
  double sigma_w = 0.3;
  double sigma_eps = 0.3;
  bool planted_oracle = false;
  std::size_t oracle_rater = 0;
  double oracle_noise = 0.0;
};

// delta ~ N(0, sigma_delta^2 I), w ~ N(0, sigma_w^2 / D I), s_r = |N(0, sigma_eps^2)|.
// Perceived thresholds are re-sorted when a draw would make them non-increasing.
// A planted oracle has zero delta and w and noise `oracle_noise`.
std::vector<RaterProfile> gen_population(std::size_t num_raters, std::size_t num_features,
                                         const std::vector<double>& thresholds, const PopulationHyper& hyper,
                                         std::uint64_t seed);

enum class Assignment { uniform, power_law };

// One rater per study. Power law: P(r) proportional to (r + 1)^-exponent.
std::vector<std::size_t> assign_raters(std::size_t num_groups, std::size_t num_raters, Assignment kind,
                                       double exponent, std::uint64_t seed);

// Labels every image with the rater assigned to its study.
Dataset label_samples(const GroundTruth& truth, const std::vector<RaterProfile>& population,
                      const std::vector<std::size_t>& group_raters, std::uint64_t seed);

// Per-rater fraction of labels equal to the gold label (NaN for raters without samples).
std::vector<double> rater_agreement(const Dataset& data);

// Writes the dataset CSV and, when `metadata` is non-empty, a companion
// "<path>.meta" key-value file.
void emit_dataset(const Dataset& data, const std::filesystem::path& path,
                  const std::map<std::string, std::string>& metadata = {});

}  // namespace addle
