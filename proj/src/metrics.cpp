#include "addle/metrics.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace addle {

namespace {

void check_sizes(std::size_t a, std::size_t b, const char* op) {
  if (a != b) throw std::invalid_argument(std::string(op) + ": scores and labels differ in length");
}

}  // namespace

std::vector<RocPoint> roc_points(std::span<const double> scores, std::span<const int> positive) {
  check_sizes(scores.size(), positive.size(), "roc_points");
  std::size_t pos = 0;
  for (int p : positive) pos += p ? 1 : 0;
  const std::size_t neg = scores.size() - pos;
  if (pos == 0 || neg == 0) {
    throw std::invalid_argument("roc_points: both classes must be present (positives " + std::to_string(pos) +
                                ", negatives " + std::to_string(neg) + ")");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<RocPoint> roc{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (positive[order[j]]) ++tp; else ++fp;
      ++j;
    }
    roc.push_back({static_cast<double>(fp) / static_cast<double>(neg), static_cast<double>(tp) / static_cast<double>(pos)});
    i = j;
  }
  return roc;
}

double partial_auc(const std::vector<RocPoint>& roc, double fpr_max) {
  if (!(fpr_max > 0.0 && fpr_max <= 1.0)) {
    throw std::invalid_argument("partial_auc: fpr_max must lie in (0, 1], got " + std::to_string(fpr_max));
  }
  double area = 0.0;
  for (std::size_t i = 1; i < roc.size(); ++i) {
    const RocPoint a = roc[i - 1], b = roc[i];
    if (a.fpr >= fpr_max) break;
    if (b.fpr <= fpr_max) {
      area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
    } else {
      const double t = a.tpr + (b.tpr - a.tpr) * (fpr_max - a.fpr) / (b.fpr - a.fpr);
      area += (fpr_max - a.fpr) * (a.tpr + t) / 2.0;
      break;
    }
  }
  return area / fpr_max;
}

double partial_auc(std::span<const double> scores, std::span<const int> positive, double fpr_max) {
  return partial_auc(roc_points(scores, positive), fpr_max);
}

double auc(std::span<const double> scores, std::span<const int> positive) {
  return partial_auc(roc_points(scores, positive), 1.0);
}

double jt_index(std::span<const double> scores, std::span<const int> labels) {
  check_sizes(scores.size(), labels.size(), "jt_index");
  std::map<int, std::size_t> rank_of;
  for (int y : labels) rank_of[y] = 0;
  if (rank_of.size() < 2) throw std::invalid_argument("jt_index: at least two distinct label groups are required");
  std::size_t next = 0;
  for (auto& [label, rank] : rank_of) rank = next++;
  const std::size_t groups = rank_of.size();

  std::vector<std::size_t> group(labels.size());
  std::vector<double> group_size(groups, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    group[i] = rank_of[labels[i]];
    group_size[group[i]] += 1.0;
  }
  double total_pairs = 0.0;
  {
    double below = 0.0;
    for (std::size_t g = 0; g < groups; ++g) {
      total_pairs += below * group_size[g];
      below += group_size[g];
    }
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // lower[g]: items already swept (strictly lower score) in group g.
  std::vector<double> lower(groups, 0.0), block(groups, 0.0);
  double concordant = 0.0, tied = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::fill(block.begin(), block.end(), 0.0);
    while (j < order.size() && scores[order[j]] == scores[order[i]]) block[group[order[j++]]] += 1.0;
    double lower_cum = 0.0, block_cum = 0.0;
    for (std::size_t g = 0; g < groups; ++g) {
      concordant += block[g] * lower_cum;
      tied += block[g] * block_cum;
      lower_cum += lower[g];
      block_cum += block[g];
    }
    for (std::size_t g = 0; g < groups; ++g) lower[g] += block[g];
    i = j;
  }
  return (concordant + 0.5 * tied) / total_pairs;
}

std::vector<std::pair<std::int64_t, double>> group_aggregate(
    std::span<const std::pair<std::int64_t, double>> scores) {
  std::unordered_map<std::int64_t, std::size_t> slot;
  std::vector<std::pair<std::int64_t, double>> sums;
  std::vector<double> counts;
  for (const auto& [g, s] : scores) {
    auto [it, inserted] = slot.emplace(g, sums.size());
    if (inserted) {
      sums.emplace_back(g, 0.0);
      counts.push_back(0.0);
    }
    sums[it->second].second += s;
    counts[it->second] += 1.0;
  }
  for (std::size_t i = 0; i < sums.size(); ++i) sums[i].second /= counts[i];
  return sums;
}

EvaluationReport evaluate(std::span<const double> scores, std::span<const int> labels, std::size_t num_classes,
                          double fpr_max) {
  EvaluationReport report;
  report.fpr_max = fpr_max;
  report.jt = jt_index(scores, labels);
  for (std::size_t k = 0; k + 1 < num_classes; ++k) {
    std::vector<int> positive(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) positive[i] = labels[i] > static_cast<int>(k) ? 1 : 0;
    CutoffReport c;
    c.cutoff = static_cast<int>(k);
    const auto npos = std::count(positive.begin(), positive.end(), 1);
    if (npos == 0 || npos == static_cast<std::ptrdiff_t>(positive.size())) {
      c.auc = c.partial_auc = std::numeric_limits<double>::quiet_NaN();
      report.cutoffs.push_back(std::move(c));
      continue;
    }
    c.roc = roc_points(scores, positive);
    c.auc = partial_auc(c.roc, 1.0);
    c.partial_auc = partial_auc(c.roc, fpr_max);
    report.cutoffs.push_back(std::move(c));
  }
  return report;
}

}  // namespace addle
