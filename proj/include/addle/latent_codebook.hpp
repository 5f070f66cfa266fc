#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "addle/tape.hpp"

namespace addle {

// Per-rater latent codes Z (one row per rater) with the isotropic Gaussian
// prior variance sigma^2. Rows are aligned with `rater_ids`.
class LatentCodebook {
 public:
  LatentCodebook(Tensor codes, double sigma2, std::vector<std::string> rater_ids);

  std::size_t num_raters() const { return codes_.dim(0); }
  std::size_t latent_dim() const { return codes_.dim(1); }
  double sigma2() const { return sigma2_; }
  const Tensor& codes() const { return codes_; }
  const std::vector<std::string>& rater_ids() const { return rater_ids_; }

  std::vector<double> code(std::size_t rater) const;
  void set_code(std::size_t rater, std::span<const double> values);
  void set_codes(Tensor codes);

  std::optional<std::size_t> index_of(const std::string& rater_id) const;
  // Like index_of but throws for unknown ids.
  std::size_t require_index(const std::string& rater_id) const;

  friend bool operator==(const LatentCodebook&, const LatentCodebook&) = default;

 private:
  Tensor codes_;
  double sigma2_;
  std::vector<std::string> rater_ids_;
};

// Default ids "0" .. "R-1".
std::vector<std::string> default_rater_ids(std::size_t count);

// Draws every code entry i.i.d. from N(0, sigma2). Same seed, same codes.
LatentCodebook init_codes(std::size_t num_raters, std::size_t latent_dim, double sigma2, std::uint64_t seed,
                          std::vector<std::string> rater_ids = {});

// sum_r ||z_r||^2 / sigma2
double prior_penalty(const LatentCodebook& codebook);
Var prior_penalty(Tape& tape, Var codes, double sigma2);

enum class InjectionMode { dense, spatial };

// Where a latent code enters the backbone. The C x M mixing matrix A for the
// point lives with the model parameters; C is the output width of the layer.
struct InjectionPoint {
  std::size_t layer_index = 0;
  InjectionMode mode = InjectionMode::dense;

  friend bool operator==(const InjectionPoint&, const InjectionPoint&) = default;
};

// conv1d(a) + rep(A z_i) for every batch row i; `codes` is [B x M].
Var inject_spatial(Tape& tape, Var input, Var kernels, Var bias, Var mixing, Var codes);

// affine(a) + A z_i for every batch row i; `codes` is [B x M].
Var inject_dense(Tape& tape, Var input, Var weight, Var bias, Var mixing, Var codes);

// [B x M] tensor holding `code` in every row.
Tensor replicate_code(std::span<const double> code, std::size_t rows);

}  // namespace addle
