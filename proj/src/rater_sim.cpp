#include "addle/rater_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace addle {

namespace {

std::vector<double> random_unit_vector(std::size_t dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& e : v) {
      e = normal(rng);
      norm += e * e;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (auto& e : v) e /= norm;
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

GroundTruth gen_samples(std::size_t num_samples, std::size_t num_features, std::size_t num_classes,
                        std::size_t group_size, std::uint64_t seed, const SampleOptions& options) {
  if (num_samples < 1 || num_features < 1) throw std::invalid_argument("gen_samples: N and D must be at least 1");
  if (group_size < 1) throw std::invalid_argument("gen_samples: group_size must be at least 1");
  if (num_classes < 2) throw std::invalid_argument("gen_samples: K must be at least 2");

  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  GroundTruth truth;
  truth.num_features = num_features;
  truth.num_classes = num_classes;
  truth.direction = random_unit_vector(num_features, rng);
  const std::vector<double> bend = random_unit_vector(num_features, rng);

  const std::size_t num_groups = (num_samples + group_size - 1) / group_size;
  std::vector<double> group_severity(num_groups);
  truth.samples.reserve(num_samples);
  for (std::size_t g = 0; g < num_groups; ++g) {
    std::vector<double> base(num_features);
    for (auto& e : base) e = normal(rng);
    const double proj = dot(bend, base);
    group_severity[g] = dot(truth.direction, base) + options.nonlinearity * (proj * proj - 1.0);
    const std::size_t members = std::min(group_size, num_samples - g * group_size);
    for (std::size_t m = 0; m < members; ++m) {
      GroundTruthSample s;
      s.group_id = static_cast<std::int64_t>(g);
      s.severity = group_severity[g];
      s.features = base;
      if (group_size > 1) {
        for (auto& e : s.features) e += options.group_jitter * normal(rng);
      }
      truth.samples.push_back(std::move(s));
    }
  }

  std::vector<double> sorted = group_severity;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t G = sorted.size();
  for (std::size_t k = 1; k < num_classes; ++k) {
    if (G < 2) {
      truth.thresholds.push_back(sorted[0] + static_cast<double>(k) - static_cast<double>(num_classes) / 2.0);
      continue;
    }
    const std::size_t pos = std::clamp<std::size_t>((k * G + num_classes / 2) / num_classes, 1, G - 1);
    double t = 0.5 * (sorted[pos - 1] + sorted[pos]);
    if (!truth.thresholds.empty() && t <= truth.thresholds.back()) {
      t = std::nextafter(truth.thresholds.back(), std::numeric_limits<double>::infinity());
    }
    truth.thresholds.push_back(t);
  }
  for (auto& s : truth.samples) {
    int y = 0;
    for (double t : truth.thresholds) y += t < s.severity ? 1 : 0;
    s.true_label = y;
  }
  return truth;
}

int rate(const GroundTruthSample& sample, const RaterProfile& profile, const std::vector<double>& thresholds, Rng& rng) {
  if (profile.threshold_shift.size() != thresholds.size()) throw std::invalid_argument("rate: threshold count mismatch");
  double perceived = sample.severity;
  if (!profile.feature_weights.empty()) {
    if (profile.feature_weights.size() != sample.features.size()) {
      throw std::invalid_argument("rate: feature weight dimension mismatch");
    }
    perceived += dot(profile.feature_weights, sample.features);
  }
  if (profile.noise > 0.0) perceived += std::normal_distribution<double>(0.0, profile.noise)(rng);
  int label = 0;
  for (std::size_t k = 0; k < thresholds.size(); ++k) label += thresholds[k] + profile.threshold_shift[k] < perceived ? 1 : 0;
  return label;
}

std::vector<RaterProfile> gen_population(std::size_t num_raters, std::size_t num_features,
                                         const std::vector<double>& thresholds, const PopulationHyper& hyper,
                                         std::uint64_t seed) {
  if (num_raters < 1) throw std::invalid_argument("gen_population: R must be at least 1");
  if (hyper.planted_oracle && hyper.oracle_rater >= num_raters) {
    throw std::invalid_argument("gen_population: oracle rater index out of range");
  }
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double w_scale = hyper.sigma_w / std::sqrt(static_cast<double>(num_features));
  std::vector<RaterProfile> population;
  population.reserve(num_raters);
  for (std::size_t r = 0; r < num_raters; ++r) {
    RaterProfile p;
    p.id = std::to_string(r);
    p.threshold_shift.resize(thresholds.size());
    for (auto& d : p.threshold_shift) d = hyper.sigma_delta * normal(rng);
    p.feature_weights.resize(num_features);
    for (auto& w : p.feature_weights) w = w_scale * normal(rng);
    p.noise = std::abs(hyper.sigma_eps * normal(rng));

    std::vector<double> perceived(thresholds.size());
    for (std::size_t k = 0; k < thresholds.size(); ++k) perceived[k] = thresholds[k] + p.threshold_shift[k];
    if (!std::is_sorted(perceived.begin(), perceived.end(), std::less_equal<>())) {
      std::sort(perceived.begin(), perceived.end());
      for (std::size_t k = 0; k < thresholds.size(); ++k) p.threshold_shift[k] = perceived[k] - thresholds[k];
    }
    if (hyper.planted_oracle && r == hyper.oracle_rater) {
      std::fill(p.threshold_shift.begin(), p.threshold_shift.end(), 0.0);
      std::fill(p.feature_weights.begin(), p.feature_weights.end(), 0.0);
      p.noise = hyper.oracle_noise;
    }
    population.push_back(std::move(p));
  }
  return population;
}

std::vector<std::size_t> assign_raters(std::size_t num_groups, std::size_t num_raters, Assignment kind,
                                       double exponent, std::uint64_t seed) {
  if (num_raters < 1) throw std::invalid_argument("assign_raters: R must be at least 1");
  Rng rng = make_rng(seed);
  std::vector<double> weights(num_raters, 1.0);
  if (kind == Assignment::power_law) {
    for (std::size_t r = 0; r < num_raters; ++r) weights[r] = std::pow(static_cast<double>(r + 1), -exponent);
  }
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::vector<std::size_t> out(num_groups);
  for (auto& r : out) r = pick(rng);
  return out;
}

Dataset label_samples(const GroundTruth& truth, const std::vector<RaterProfile>& population,
                      const std::vector<std::size_t>& group_raters, std::uint64_t seed) {
  Dataset data;
  data.num_features = truth.num_features;
  for (const auto& p : population) data.rater_ids.push_back(p.id);
  Rng rng = make_rng(seed);
  data.samples.reserve(truth.samples.size());
  for (std::size_t i = 0; i < truth.samples.size(); ++i) {
    const auto& gt = truth.samples[i];
    const auto g = static_cast<std::size_t>(gt.group_id);
    if (g >= group_raters.size() || group_raters[g] >= population.size()) {
      throw std::invalid_argument("label_samples: every study needs a valid rater assignment");
    }
    Sample s;
    s.sample_id = static_cast<std::int64_t>(i);
    s.group_id = gt.group_id;
    s.rater = group_raters[g];
    s.label = rate(gt, population[s.rater], truth.thresholds, rng);
    s.true_label = gt.true_label;
    s.features = gt.features;
    data.samples.push_back(std::move(s));
  }
  return data;
}

std::vector<double> rater_agreement(const Dataset& data) {
  std::vector<double> hit(data.num_raters(), 0.0), total(data.num_raters(), 0.0);
  for (const auto& s : data.samples) {
    if (!s.true_label) continue;
    total[s.rater] += 1.0;
    hit[s.rater] += s.label == *s.true_label ? 1.0 : 0.0;
  }
  std::vector<double> out(data.num_raters());
  for (std::size_t r = 0; r < out.size(); ++r)
    out[r] = total[r] > 0.0 ? hit[r] / total[r] : std::numeric_limits<double>::quiet_NaN();
  return out;
}

void emit_dataset(const Dataset& data, const std::filesystem::path& path,
                  const std::map<std::string, std::string>& metadata) {
  write_dataset_csv(data, path);
  if (!metadata.empty()) write_metadata(metadata, std::filesystem::path(path.string() + ".meta"));
}

}  // namespace addle
