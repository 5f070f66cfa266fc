#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "addle/backbone.hpp"
#include "addle/latent_codebook.hpp"

namespace addle {

enum class TrainMode { addle, baseline, multi_head, jlsl };

std::string mode_name(TrainMode mode);
TrainMode parse_mode(const std::string& name);

// A trained predictor exposing one or more virtual raters.
//   addle:      one theta, latent codebook, rater r uses code z_r
//   baseline:   one theta, no latent, a single pooled rater
//   multi_head: one theta with one head block per rater
//   jlsl:       one full theta per rater
struct RaterModel {
  TrainMode mode = TrainMode::addle;
  BackboneConfig backbone;
  std::vector<ModelParams> params;
  std::optional<LatentCodebook> codebook;
  std::vector<std::string> rater_ids;

  std::size_t num_raters() const { return rater_ids.size(); }
  std::optional<std::size_t> index_of(const std::string& rater_id) const;
  // Theta plus latent codes.
  std::size_t parameter_count() const;
  void validate() const;

  friend bool operator==(const RaterModel&, const RaterModel&) = default;
};

inline const std::string kPooledRater = "pooled";

// Severity scores of virtual rater r for every row of X.
std::vector<double> rater_scores(const RaterModel& model, const Tensor& inputs, std::size_t rater);
double predict_rater(const RaterModel& model, std::span<const double> x, std::size_t rater);

// Scores of the latent-conditioned backbone for an arbitrary code (addle only).
std::vector<double> code_scores(const RaterModel& model, const Tensor& inputs, std::span<const double> code);

// R x N matrix of per-rater scores.
std::vector<std::vector<double>> score_matrix(const RaterModel& model, const Tensor& inputs);

// Scores of each sample under its own rater (labels' author). Unknown raters throw.
std::vector<double> own_rater_scores(const RaterModel& model, const Tensor& inputs,
                                     std::span<const std::size_t> model_raters);

}  // namespace addle
