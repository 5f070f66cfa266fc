#include "addle/latent_analysis.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

#include "addle/metrics.hpp"

namespace addle {

std::vector<double> interpolate(std::span<const double> z0, std::span<const double> z1, double alpha) {
  if (z0.size() != z1.size()) {
    throw std::invalid_argument("interpolate: endpoints have dimensions " + std::to_string(z0.size()) + " and " +
                                std::to_string(z1.size()));
  }
  std::vector<double> out(z0.size());
  for (std::size_t i = 0; i < z0.size(); ++i) out[i] = z0[i] + alpha * (z1[i] - z0[i]);
  return out;
}

std::vector<double> linear_grid(double lo, double hi, std::size_t steps) {
  if (steps == 0) return {};
  if (steps == 1) return {lo};
  std::vector<double> out(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(steps - 1);
  }
  out.back() = hi;
  return out;
}

double code_jt(const RaterModel& model, std::span<const double> code, const Tensor& inputs, std::span<const int> gold) {
  return jt_index(code_scores(model, inputs, code), gold);
}

std::vector<double> performance_curve(const RaterModel& model, const std::vector<std::vector<double>>& codes,
                                      const Tensor& inputs, std::span<const int> gold) {
  std::vector<double> out;
  out.reserve(codes.size());
  for (const auto& z : codes) out.push_back(code_jt(model, z, inputs, gold));
  return out;
}

std::vector<double> PcaBasis::project(std::span<const double> z) const {
  if (z.size() != mean.size()) throw std::invalid_argument("pca: code dimension mismatch");
  std::vector<double> out(components.size(), 0.0);
  for (std::size_t c = 0; c < components.size(); ++c)
    for (std::size_t m = 0; m < z.size(); ++m) out[c] += (z[m] - mean[m]) * components[c][m];
  return out;
}

PcaBasis pca(const Tensor& codes) {
  if (codes.rank() != 2 || codes.dim(0) < 2) throw std::invalid_argument("pca: needs at least two codes");
  const auto r = static_cast<Eigen::Index>(codes.dim(0));
  const auto m = static_cast<Eigen::Index>(codes.dim(1));
  Eigen::MatrixXd z(r, m);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < m; ++j) z(i, j) = codes.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  const Eigen::RowVectorXd mu = z.colwise().mean();
  const Eigen::MatrixXd centered = z.rowwise() - mu;
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(r - 1);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw std::runtime_error("pca: eigendecomposition failed");

  PcaBasis basis;
  basis.mean.assign(mu.data(), mu.data() + m);
  double total = 0.0;
  for (Eigen::Index k = m - 1; k >= 0; --k) {
    const double lambda = std::max(solver.eigenvalues()(k), 0.0);
    Eigen::VectorXd v = solver.eigenvectors().col(k);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    basis.components.emplace_back(v.data(), v.data() + m);
    basis.eigenvalues.push_back(lambda);
    total += lambda;
  }
  if (!(total > 0.0)) throw std::invalid_argument("pca: codes have zero variance");
  for (double l : basis.eigenvalues) basis.explained_ratio.push_back(l / total);
  return basis;
}

std::pair<double, double> projection_range(const PcaBasis& basis, const Tensor& codes, std::size_t component) {
  if (component >= basis.components.size()) throw std::out_of_range("pca: component index out of range");
  double lo = 0.0, hi = 0.0;
  for (std::size_t r = 0; r < codes.dim(0); ++r) {
    const auto row = codes.row(r);
    const double p = basis.project(row)[component];
    if (r == 0 || p < lo) lo = p;
    if (r == 0 || p > hi) hi = p;
  }
  return {lo, hi};
}

std::vector<SweepPoint> component_sweep(const RaterModel& model, const PcaBasis& basis, std::size_t component,
                                        std::span<const double> lambdas, const Tensor& inputs,
                                        std::span<const int> gold, std::span<const double> base) {
  if (component >= basis.components.size()) {
    throw std::out_of_range("component_sweep: component " + std::to_string(component) + " out of range");
  }
  const std::vector<double> origin = base.empty() ? basis.mean : std::vector<double>(base.begin(), base.end());
  if (origin.size() != basis.mean.size()) throw std::invalid_argument("component_sweep: base dimension mismatch");
  const auto& dir = basis.components[component];
  std::vector<SweepPoint> out;
  for (double lambda : lambdas) {
    std::vector<double> z(origin.size());
    for (std::size_t m = 0; m < z.size(); ++m) z[m] = origin[m] + lambda * dir[m];
    out.push_back({lambda, code_jt(model, z, inputs, gold)});
  }
  return out;
}

namespace {

bool as_integer(const std::string& s, long long& v) {
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  return !s.empty() && res.ec == std::errc() && res.ptr == end;
}

bool id_less(const std::string& a, const std::string& b) {
  long long x = 0, y = 0;
  if (as_integer(a, x) && as_integer(b, y)) return x < y;
  return a < b;
}

}  // namespace

std::vector<std::pair<std::string, double>> code_norms(const LatentCodebook& codebook) {
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t r = 0; r < codebook.num_raters(); ++r) {
    double sq = 0.0;
    for (double v : codebook.code(r)) sq += v * v;
    out.emplace_back(codebook.rater_ids()[r], std::sqrt(sq));
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return id_less(a.first, b.first); });
  return out;
}

}  // namespace addle
