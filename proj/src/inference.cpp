#include "addle/inference.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <stdexcept>

namespace addle {

namespace {

int pauc_cutoff(const std::string& metric) {
  if (metric.size() < 5 || metric.compare(0, 4, "pauc") != 0) return -1;
  const std::string digits = metric.substr(4);
  if (!std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) return -1;
  return std::stoi(digits);
}

}  // namespace

void validate_metric(const std::string& metric, std::size_t num_classes) {
  if (metric == "jt") return;
  const int k = pauc_cutoff(metric);
  if (k < 0 || static_cast<std::size_t>(k) + 1 >= num_classes) {
    throw std::invalid_argument("unknown selection metric '" + metric + "' (expected jt or pauc0..pauc" +
                                std::to_string(num_classes - 2) + ")");
  }
}

double selection_metric(const std::string& metric, std::span<const double> scores, std::span<const int> labels,
                        double fpr_max) {
  if (metric == "jt") return jt_index(scores, labels);
  const int k = pauc_cutoff(metric);
  if (k < 0) throw std::invalid_argument("unknown selection metric '" + metric + "'");
  std::vector<int> positive(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) positive[i] = labels[i] > k ? 1 : 0;
  return partial_auc(scores, positive, fpr_max);
}

std::vector<double> average_scores(const std::vector<std::vector<double>>& scores,
                                   std::span<const std::size_t> raters) {
  if (raters.empty()) throw std::invalid_argument("average_scores: empty rater set");
  std::vector<std::size_t> order(raters.begin(), raters.end());
  std::sort(order.begin(), order.end());
  const std::size_t n = scores.at(order.front()).size();
  std::vector<double> out(n, 0.0);
  for (std::size_t r : order) {
    if (r >= scores.size()) throw std::out_of_range("average_scores: rater " + std::to_string(r) + " out of range");
    if (scores[r].size() != n) throw std::invalid_argument("average_scores: ragged score matrix");
    for (std::size_t i = 0; i < n; ++i) out[i] += scores[r][i];
  }
  const double count = static_cast<double>(order.size());
  for (double& v : out) v /= count;
  return out;
}

std::vector<double> mean_rater_scores(const RaterModel& model, const Tensor& inputs) {
  std::vector<std::size_t> all(model.num_raters());
  for (std::size_t r = 0; r < all.size(); ++r) all[r] = r;
  return average_scores(score_matrix(model, inputs), all);
}

double mean_rater(const RaterModel& model, std::span<const double> x) {
  const Tensor inputs({1, x.size()}, std::vector<double>(x.begin(), x.end()));
  return mean_rater_scores(model, inputs)[0];
}

StudyScores study_level(std::span<const double> scores, std::span<const int> labels,
                        std::span<const std::int64_t> groups) {
  if (scores.size() != labels.size() || scores.size() != groups.size()) {
    throw std::invalid_argument("study_level: scores, labels and groups differ in length");
  }
  std::vector<std::pair<std::int64_t, double>> tagged(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) tagged[i] = {groups[i], scores[i]};
  std::map<std::int64_t, int> first_label;
  for (std::size_t i = 0; i < labels.size(); ++i) first_label.try_emplace(groups[i], labels[i]);
  StudyScores out;
  for (const auto& [g, s] : group_aggregate(tagged)) {
    out.groups.push_back(g);
    out.scores.push_back(s);
    out.labels.push_back(first_label.at(g));
  }
  return out;
}

VirtualRaterSet greedy_select(const std::vector<std::vector<double>>& scores, std::span<const int> gold,
                              std::span<const std::int64_t> groups, const std::string& metric, double fpr_max) {
  if (scores.empty()) throw std::invalid_argument("greedy_select: no virtual raters");
  if (gold.empty()) throw std::invalid_argument("greedy_select: empty validation set");
  auto value_of = [&](const std::vector<std::size_t>& set) {
    const std::vector<double> avg = average_scores(scores, set);
    if (groups.empty()) return selection_metric(metric, avg, gold, fpr_max);
    const StudyScores s = study_level(avg, gold, groups);
    return selection_metric(metric, s.scores, s.labels, fpr_max);
  };

  VirtualRaterSet out;
  out.metric = metric;
  std::vector<bool> used(scores.size(), false);
  double current = -std::numeric_limits<double>::infinity();
  while (out.raters.size() < scores.size()) {
    std::size_t best_r = scores.size();
    double best_v = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < scores.size(); ++r) {
      if (used[r]) continue;
      std::vector<std::size_t> trial = out.raters;
      trial.push_back(r);
      const double v = value_of(trial);
      if (v > best_v) {
        best_v = v;
        best_r = r;
      }
    }
    if (best_r == scores.size() || !(best_v > current)) break;
    used[best_r] = true;
    out.raters.push_back(best_r);
    out.step_scores.push_back(best_v);
    current = best_v;
  }
  return out;
}

VirtualRaterSet greedy_select(const RaterModel& model, const Dataset& validation, const std::string& metric,
                              double fpr_max, bool study) {
  if (validation.empty()) throw std::invalid_argument("greedy_select: empty validation set");
  validate_metric(metric, model.backbone.num_classes);
  const auto scores = score_matrix(model, validation.feature_matrix());
  const auto gold = validation.gold_labels();
  const auto groups = validation.group_ids();
  return greedy_select(scores, gold, study ? std::span<const std::int64_t>(groups) : std::span<const std::int64_t>{},
                       metric, fpr_max);
}

std::vector<double> greedy_scores(const RaterModel& model, const VirtualRaterSet& set, const Tensor& inputs) {
  if (set.raters.empty()) throw std::invalid_argument("greedy_predict: empty rater set");
  std::vector<std::size_t> order = set.raters;
  std::sort(order.begin(), order.end());
  std::vector<std::vector<double>> scores(model.num_raters());
  for (std::size_t r : order) scores.at(r) = rater_scores(model, inputs, r);
  return average_scores(scores, order);
}

double greedy_predict(const RaterModel& model, const VirtualRaterSet& set, std::span<const double> x) {
  const Tensor inputs({1, x.size()}, std::vector<double>(x.begin(), x.end()));
  return greedy_scores(model, set, inputs)[0];
}

EvaluationReport evaluate_scores(std::span<const double> scores, const Dataset& data, std::size_t num_classes,
                                 bool study, double fpr_max) {
  const auto gold = data.gold_labels();
  if (!study) return evaluate(scores, gold, num_classes, fpr_max);
  const auto groups = data.group_ids();
  const StudyScores s = study_level(scores, gold, groups);
  return evaluate(s.scores, s.labels, num_classes, fpr_max);
}

}  // namespace addle
