#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "addle/dataset.hpp"
#include "addle/metrics.hpp"
#include "addle/model.hpp"

namespace addle {

// Selection metric names: "jt", or "pauc<k>" for the normalized partial AUC of cutoff k.
double selection_metric(const std::string& metric, std::span<const double> scores, std::span<const int> labels,
                        double fpr_max = 0.30);
void validate_metric(const std::string& metric, std::size_t num_classes);

struct VirtualRaterSet {
  std::vector<std::size_t> raters;  // in the order chosen
  std::string metric = "jt";
  std::vector<double> step_scores;  // validation metric after each accepted step
};

// Average of the listed rows of an R x N score matrix, summed in ascending
// rater index.
std::vector<double> average_scores(const std::vector<std::vector<double>>& scores, std::span<const std::size_t> raters);

std::vector<double> mean_rater_scores(const RaterModel& model, const Tensor& inputs);
double mean_rater(const RaterModel& model, std::span<const double> x);

// Per-group mean score and the group's label (taken from its first sample).
struct StudyScores {
  std::vector<std::int64_t> groups;
  std::vector<double> scores;
  std::vector<int> labels;
};
StudyScores study_level(std::span<const double> scores, std::span<const int> labels,
                        std::span<const std::int64_t> groups);

// Greedy forward selection on a precomputed score matrix. Each step adds the
// candidate maximizing the metric of the averaged score (lowest index on ties)
// and stops once no candidate strictly improves it. Non-empty `groups` scores
// at the study level.
VirtualRaterSet greedy_select(const std::vector<std::vector<double>>& scores, std::span<const int> gold,
                              std::span<const std::int64_t> groups, const std::string& metric = "jt",
                              double fpr_max = 0.30);

VirtualRaterSet greedy_select(const RaterModel& model, const Dataset& validation, const std::string& metric = "jt",
                              double fpr_max = 0.30, bool study = true);

std::vector<double> greedy_scores(const RaterModel& model, const VirtualRaterSet& set, const Tensor& inputs);
double greedy_predict(const RaterModel& model, const VirtualRaterSet& set, std::span<const double> x);

// Full report on gold labels, optionally after study-level aggregation.
EvaluationReport evaluate_scores(std::span<const double> scores, const Dataset& data, std::size_t num_classes,
                                 bool study, double fpr_max);

}  // namespace addle
