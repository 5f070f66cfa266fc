#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace addle {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;

  friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

// ROC from sweeping every distinct score threshold (descending), tied scores
// grouped into one step. Starts at (0,0) and ends at (1,1). `positive[i]` is
// nonzero for the positive class. Throws if either class is absent.
std::vector<RocPoint> roc_points(std::span<const double> scores, std::span<const int> positive);

// Trapezoidal area under the full ROC. Ties count half (Mann-Whitney).
double auc(std::span<const double> scores, std::span<const int> positive);

// Area under the ROC for FPR in [0, fpr_max], interpolating linearly at the
// boundary, divided by fpr_max so that a perfect ranking scores 1.
double partial_auc(std::span<const double> scores, std::span<const int> positive, double fpr_max = 0.30);
double partial_auc(const std::vector<RocPoint>& roc, double fpr_max);

// Jonckheere-Terpstra index: over all pairs with label_i < label_j, the fraction
// with score_i < score_j, ties counting half. Needs two distinct labels.
double jt_index(std::span<const double> scores, std::span<const int> labels);

// Per-group arithmetic mean, groups in order of first appearance.
std::vector<std::pair<std::int64_t, double>> group_aggregate(
    std::span<const std::pair<std::int64_t, double>> scores);

struct CutoffReport {
  int cutoff = 0;  // positive class is label > cutoff
  double auc = 0.0;
  double partial_auc = 0.0;
  std::vector<RocPoint> roc;
};

struct EvaluationReport {
  double jt = 0.0;
  double fpr_max = 0.30;
  std::vector<CutoffReport> cutoffs;
};

// JT plus, for every cutoff k in [0, K-2], AUC and normalized partial AUC of
// the binary split label > k. A cutoff missing one class gets NaN areas and no curve.
EvaluationReport evaluate(std::span<const double> scores, std::span<const int> labels, std::size_t num_classes,
                          double fpr_max = 0.30);

}  // namespace addle
