#pragma once

// Independent reference implementations used only by the tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "addle/backbone.hpp"
#include "addle/metrics.hpp"
#include "addle/tensor.hpp"

namespace oracle {

inline std::vector<double> random_values(std::size_t n, std::uint64_t seed, double lo = -2.0, double hi = 2.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

inline addle::Tensor random_tensor(addle::Shape shape, std::uint64_t seed, double lo = -2.0, double hi = 2.0) {
  const std::size_t n = addle::shape_numel(shape);
  return addle::Tensor(std::move(shape), random_values(n, seed, lo, hi));
}

// Small random architecture with random injection points (at least one).
inline addle::BackboneConfig random_backbone(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  addle::BackboneConfig cfg;
  cfg.input_dim = pick(3, 7);
  cfg.num_classes = pick(2, 5);
  cfg.hidden.clear();
  for (std::size_t i = pick(0, 2); i > 0; --i) cfg.hidden.push_back(pick(2, 5));
  cfg.latent_dim = pick(1, 3);
  if (pick(0, 1)) cfg.conv = addle::ConvFrontEnd{pick(1, 3), pick(1, 3)};
  cfg.injections.clear();
  auto mode_at = [&](std::size_t layer) {
    return cfg.is_conv_layer(layer) ? addle::InjectionMode::spatial : addle::InjectionMode::dense;
  };
  for (std::size_t layer = 0; layer < cfg.num_layers(); ++layer)
    if (pick(0, 1)) cfg.injections.push_back({layer, mode_at(layer)});
  if (cfg.injections.empty()) cfg.injections.push_back({0, mode_at(0)});
  return cfg;
}

// Random parameters including biases, so no pre-activation sits exactly on the rectifier kink.
inline addle::ModelParams random_params(const addle::BackboneConfig& cfg, std::uint64_t seed) {
  addle::ModelParams p = addle::init_params(cfg, seed);
  for (std::size_t l = 0; l < p.layers.size(); ++l)
    p.layers[l].bias = random_tensor(p.layers[l].bias.shape(), seed * 31 + l, -0.5, 0.5);
  return p;
}

// One ROC point per threshold in {+inf} U scores, counting s >= t as positive calls.
inline std::vector<addle::RocPoint> roc(std::span<const double> s, std::span<const int> pos) {
  std::vector<double> thresholds(s.begin(), s.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.insert(thresholds.begin(), std::numeric_limits<double>::infinity());
  double np = 0, nn = 0;
  for (int p : pos) (p ? np : nn) += 1;
  std::vector<addle::RocPoint> out;
  for (double t : thresholds) {
    double tp = 0, fp = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] >= t) (pos[i] ? tp : fp) += 1;
    out.push_back({fp / nn, tp / np});
  }
  return out;
}

// Mann-Whitney pair count.
inline double auc(std::span<const double> s, std::span<const int> pos) {
  double num = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (!pos[i] || pos[j]) continue;
      pairs += 1;
      num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  return num / pairs;
}

// Trapezoid integration of the piecewise-linear ROC on a grid refining every
// multiple of 1/N_neg by `refine` steps, clipped at fpr_max.
inline double partial_auc(std::span<const double> s, std::span<const int> pos, double fpr_max, int refine = 16) {
  const auto pts = roc(s, pos);
  double nn = 0;
  for (int p : pos) nn += p ? 0 : 1;
  // Linear piece of the curve whose fpr span contains x (vertical jumps have no area).
  auto piece = [&](double x) {
    for (std::size_t i = 1; i < pts.size(); ++i)
      if (pts[i].fpr > pts[i - 1].fpr && x >= pts[i - 1].fpr && x <= pts[i].fpr) return i;
    return pts.size() - 1;
  };
  auto eval = [&](std::size_t i, double x) {
    const auto& a = pts[i - 1];
    const auto& b = pts[i];
    return a.tpr + (b.tpr - a.tpr) * (x - a.fpr) / (b.fpr - a.fpr);
  };
  std::vector<double> grid;
  for (int k = 0; k < static_cast<int>(nn); ++k)
    for (int r = 0; r < refine; ++r) grid.push_back((k + static_cast<double>(r) / refine) / nn);
  grid.push_back(1.0);
  grid.push_back(fpr_max);
  std::sort(grid.begin(), grid.end());
  double area = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double a = grid[i - 1], b = std::min(grid[i], fpr_max);
    if (b <= a) continue;
    const std::size_t seg = piece(0.5 * (a + b));
    area += 0.5 * (eval(seg, a) + eval(seg, b)) * (b - a);
  }
  return area / fpr_max;
}

inline double jt(std::span<const double> s, std::span<const int> y) {
  double num = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (!(y[i] < y[j])) continue;
      pairs += 1;
      num += s[j] > s[i] ? 1.0 : (s[j] == s[i] ? 0.5 : 0.0);
    }
  return num / pairs;
}

// Cyclic Jacobi rotations; returns eigenvalues descending with matching eigenvectors (columns).
inline std::pair<std::vector<double>, std::vector<std::vector<double>>> jacobi_eigen(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a[x][x] > a[y][y]; });
  std::vector<double> vals;
  std::vector<std::vector<double>> vecs;
  for (auto i : order) {
    vals.push_back(a[i][i]);
    std::vector<double> col(n);
    for (std::size_t k = 0; k < n; ++k) col[k] = v[k][i];
    vecs.push_back(col);
  }
  return {vals, vecs};
}

inline std::vector<std::vector<double>> covariance(const addle::Tensor& z) {
  const std::size_t r = z.dim(0), m = z.dim(1);
  std::vector<double> mean(m, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < m; ++j) mean[j] += z.at(i, j) / static_cast<double>(r);
  std::vector<std::vector<double>> c(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < m; ++b) c[a][b] += (z.at(i, a) - mean[a]) * (z.at(i, b) - mean[b]);
  for (auto& row : c)
    for (auto& x : row) x /= static_cast<double>(r - 1);
  return c;
}

}  // namespace oracle
