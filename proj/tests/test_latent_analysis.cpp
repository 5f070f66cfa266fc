#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "addle/latent_analysis.hpp"
#include "addle/metrics.hpp"
#include "oracles.hpp"

using namespace addle;

namespace {

std::vector<double> signed_convention(std::vector<double> v) {
  std::size_t arg = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
  if (v[arg] < 0)
    for (auto& x : v) x = -x;
  return v;
}

RaterModel small_model(std::size_t raters, std::uint64_t seed) {
  BackboneConfig b;
  b.input_dim = 4;
  b.hidden = {6};
  b.num_classes = 3;
  b.latent_dim = 3;
  RaterModel m;
  m.backbone = b;
  m.rater_ids = default_rater_ids(raters);
  m.params = {init_params(b, seed)};
  m.codebook = init_codes(raters, 3, 1.0, seed + 1, m.rater_ids);
  return m;
}

}  // namespace

TEST_CASE("interpolation and grids") {
  const std::vector<double> a = {1.0, -2.0, 0.5}, b = {3.0, 2.0, 0.5};
  CHECK(interpolate(a, b, 0.0) == a);
  CHECK(interpolate(a, b, 1.0) == b);
  CHECK(interpolate(a, b, 0.5) == std::vector<double>{2.0, 0.0, 0.5});
  CHECK(interpolate(a, b, 2.0) == std::vector<double>{5.0, 6.0, 0.5});
  CHECK_THROWS_AS(interpolate(a, std::vector<double>{1.0}, 0.5), std::invalid_argument);

  CHECK(linear_grid(-1.0, 1.0, 5) == std::vector<double>{-1.0, -0.5, 0.0, 0.5, 1.0});
  const auto g = linear_grid(0.0, 0.7, 8);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == 0.7);
}

TEST_CASE("pca matches a Jacobi eigensolver") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t r = 4 + seed, m = 2 + seed % 5;
    const Tensor z = oracle::random_tensor({r, m}, seed);
    const PcaBasis basis = pca(z);
    const auto [vals, vecs] = oracle::jacobi_eigen(oracle::covariance(z));
    REQUIRE(basis.eigenvalues.size() == m);
    double total = 0.0;
    for (double v : vals) total += v;
    double ratio_sum = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      CHECK(basis.eigenvalues[c] == doctest::Approx(vals[c]).epsilon(1e-9));
      CHECK(basis.explained_ratio[c] == doctest::Approx(vals[c] / total).epsilon(1e-9));
      ratio_sum += basis.explained_ratio[c];
      const auto expected = signed_convention(vecs[c]);
      for (std::size_t k = 0; k < m; ++k) CHECK(basis.components[c][k] == doctest::Approx(expected[k]).epsilon(1e-7));
      for (std::size_t d = 0; d < m; ++d) {
        double dot = 0.0;
        for (std::size_t k = 0; k < m; ++k) dot += basis.components[c][k] * basis.components[d][k];
        CHECK(std::abs(dot - (c == d ? 1.0 : 0.0)) < 1e-10);
      }
      if (c > 0) CHECK(basis.eigenvalues[c] <= basis.eigenvalues[c - 1]);
    }
    CHECK(ratio_sum == doctest::Approx(1.0).epsilon(1e-12));

    // projections reconstruct every code exactly
    for (std::size_t i = 0; i < r; ++i) {
      const auto row = z.row(i);
      const auto proj = basis.project(row);
      for (std::size_t k = 0; k < m; ++k) {
        double back = basis.mean[k];
        for (std::size_t c = 0; c < m; ++c) back += proj[c] * basis.components[c][k];
        CHECK(back == doctest::Approx(row[k]).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("rank-one codes") {
  const std::vector<double> dir = {0.6, -0.8, 0.0};
  const std::vector<double> t = {-2.0, -0.5, 1.0, 1.5};
  Tensor z({4, 3});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t k = 0; k < 3; ++k) z.at(i, k) = 1.0 + t[i] * dir[k];
  const PcaBasis basis = pca(z);
  double var = 0.0;
  for (double v : t) var += v * v / 3.0;
  CHECK(basis.eigenvalues[0] == doctest::Approx(var).epsilon(1e-12));
  CHECK(basis.explained_ratio[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(basis.eigenvalues[1]) < 1e-12);
  CHECK(basis.components[0][0] == doctest::Approx(-0.6).epsilon(1e-12));
  CHECK(basis.components[0][1] == doctest::Approx(0.8).epsilon(1e-12));
  const auto [lo, hi] = projection_range(basis, z, 0);
  CHECK(lo == doctest::Approx(-1.5).epsilon(1e-12));
  CHECK(hi == doctest::Approx(2.0).epsilon(1e-12));
  CHECK_THROWS_AS(projection_range(basis, z, 3), std::out_of_range);
}

TEST_CASE("pca guards") {
  CHECK_THROWS_AS(pca(Tensor({3, 2}, 1.5)), std::invalid_argument);
  CHECK_THROWS_AS(pca(Tensor({1, 2}, {1.0, 2.0})), std::invalid_argument);
}

TEST_CASE("code evaluation and component sweeps") {
  const RaterModel m = small_model(6, 4);
  const Tensor x = oracle::random_tensor({40, 4}, 5);
  std::vector<int> gold;
  for (std::size_t i = 0; i < 40; ++i) gold.push_back(static_cast<int>(i % 3));

  const auto z2 = m.codebook->code(2);
  CHECK(code_jt(m, z2, x, gold) == jt_index(rater_scores(m, x, 2), gold));
  const auto curve = performance_curve(m, {m.codebook->code(0), z2}, x, gold);
  REQUIRE(curve.size() == 2);
  CHECK(curve[1] == code_jt(m, z2, x, gold));

  const PcaBasis basis = pca(m.codebook->codes());
  const double lambdas[] = {-1.0, 0.0, 1.0};
  const auto sweep = component_sweep(m, basis, 0, lambdas, x, gold);
  REQUIRE(sweep.size() == 3);
  CHECK(sweep[1].lambda == 0.0);
  CHECK(sweep[1].jt == code_jt(m, basis.mean, x, gold));
  std::vector<double> shifted = basis.mean;
  for (std::size_t k = 0; k < shifted.size(); ++k) shifted[k] += basis.components[0][k];
  CHECK(sweep[2].jt == code_jt(m, shifted, x, gold));

  // sweeping from a rater code along its own residual direction recovers it
  const auto proj = basis.project(z2);
  std::vector<double> base = basis.mean;
  for (std::size_t c = 1; c < proj.size(); ++c)
    for (std::size_t k = 0; k < base.size(); ++k) base[k] += proj[c] * basis.components[c][k];
  const double at[] = {proj[0]};
  const auto hit = component_sweep(m, basis, 0, at, x, gold, base);
  CHECK(hit[0].jt == doctest::Approx(code_jt(m, z2, x, gold)).epsilon(1e-12));

  CHECK_THROWS_AS(component_sweep(m, basis, 9, lambdas, x, gold), std::out_of_range);
  const double wrong[] = {1.0};
  CHECK_THROWS_AS(component_sweep(m, basis, 0, lambdas, x, gold, wrong), std::invalid_argument);
}

TEST_CASE("code norms") {
  const LatentCodebook cb(Tensor({3, 2}, {3.0, 4.0, 0.0, 0.0, 1.0, 1.0}), 1.0, {"10", "2", "1"});
  const auto norms = code_norms(cb);
  REQUIRE(norms.size() == 3);
  CHECK(norms[0].first == "1");
  CHECK(norms[0].second == doctest::Approx(std::sqrt(2.0)));
  CHECK(norms[1] == std::pair<std::string, double>{"2", 0.0});
  CHECK(norms[2] == std::pair<std::string, double>{"10", 5.0});

  const LatentCodebook named(Tensor({2, 1}, {1.0, -2.0}), 1.0, {"beta", "alpha"});
  CHECK(code_norms(named)[0].first == "alpha");
}

TEST_CASE("small latent examples") {
  const std::vector<double> o = {0.0, 0.0}, f = {2.0, 4.0};
  CHECK(interpolate(o, f, 0.5) == std::vector<double>{1.0, 2.0});

  const RaterModel m = small_model(4, 11);
  const Tensor x = oracle::random_tensor({30, 4}, 12);
  std::vector<int> gold;
  for (std::size_t i = 0; i < 30; ++i) gold.push_back(static_cast<int>(i % 3));
  const auto z = m.codebook->code(1);
  std::vector<std::vector<double>> dup;
  for (double a : linear_grid(0.0, 1.0, 5)) dup.push_back(interpolate(z, z, a));
  const auto flat = performance_curve(m, dup, x, gold);
  for (double v : flat) CHECK(v == flat[0]);
  const auto single = performance_curve(m, {z}, x, gold);
  REQUIRE(single.size() == 1);
  CHECK(single[0] == jt_index(rater_scores(m, x, 1), gold));

  const PcaBasis two = pca(Tensor({2, 2}, {1.0, 1.0, -1.0, -1.0}));
  CHECK(two.explained_ratio[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(two.explained_ratio[1]) < 1e-12);
}

TEST_CASE("pca reconstructs the covariance of a full codebook") {
  const Tensor z = oracle::random_tensor({20, 10}, 77, -2.0, 2.0);
  const PcaBasis basis = pca(z);
  const auto cov = oracle::covariance(z);
  double worst = 0.0;
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 10; ++j) {
      double r = 0.0;
      for (std::size_t c = 0; c < 10; ++c) r += basis.eigenvalues[c] * basis.components[c][i] * basis.components[c][j];
      worst = std::max(worst, std::abs(r - cov[i][j]));
    }
  CHECK(worst < 1e-9);

  for (std::size_t c = 0; c < 3; ++c) {
    const auto [lo, hi] = projection_range(basis, z, c);
    double mn = 1e300, mx = -1e300;
    for (std::size_t r = 0; r < 20; ++r) {
      const double p = basis.project(z.row(r))[c];
      mn = std::min(mn, p);
      mx = std::max(mx, p);
    }
    const auto grid = linear_grid(lo, hi, 7);
    CHECK(grid.front() == mn);
    CHECK(grid.back() == mx);
  }
}
