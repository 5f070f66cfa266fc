#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "addle/latent_codebook.hpp"
#include "addle/model.hpp"
#include "addle/tensor.hpp"

namespace addle {

// z0 + alpha (z1 - z0)
std::vector<double> interpolate(std::span<const double> z0, std::span<const double> z1, double alpha);

// `steps` evenly spaced values from lo to hi inclusive.
std::vector<double> linear_grid(double lo, double hi, std::size_t steps);

// JT on gold labels of the model conditioned on each code in turn.
double code_jt(const RaterModel& model, std::span<const double> code, const Tensor& inputs, std::span<const int> gold);
std::vector<double> performance_curve(const RaterModel& model, const std::vector<std::vector<double>>& codes,
                                      const Tensor& inputs, std::span<const int> gold);

struct PcaBasis {
  std::vector<double> mean;
  std::vector<std::vector<double>> components;  // one unit vector per row, by descending eigenvalue
  std::vector<double> eigenvalues;
  std::vector<double> explained_ratio;

  std::vector<double> project(std::span<const double> z) const;
};

// Eigendecomposition of the 1/(R-1) sample covariance of the rows of Z. The
// largest-magnitude entry of every component is made positive.
PcaBasis pca(const Tensor& codes);

// Min and max projection of the rows of Z on component c.
std::pair<double, double> projection_range(const PcaBasis& basis, const Tensor& codes, std::size_t component);

struct SweepPoint {
  double lambda = 0.0;
  double jt = 0.0;
};

// JT of base + lambda * component_c for every lambda; `base` defaults to the mean.
std::vector<SweepPoint> component_sweep(const RaterModel& model, const PcaBasis& basis, std::size_t component,
                                        std::span<const double> lambdas, const Tensor& inputs,
                                        std::span<const int> gold, std::span<const double> base = {});

// Euclidean norm of every code, ordered by rater id (numerically when both ids are integers).
std::vector<std::pair<std::string, double>> code_norms(const LatentCodebook& codebook);

}  // namespace addle
