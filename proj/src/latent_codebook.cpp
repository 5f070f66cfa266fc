#include "addle/latent_codebook.hpp"

#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

#include "addle/seeds.hpp"

namespace addle {

LatentCodebook::LatentCodebook(Tensor codes, double sigma2, std::vector<std::string> rater_ids)
    : codes_(std::move(codes)), sigma2_(sigma2), rater_ids_(std::move(rater_ids)) {
  if (codes_.rank() != 2 || codes_.dim(0) < 1 || codes_.dim(1) < 1) {
    throw std::invalid_argument("codebook: codes must be an R x M matrix with R, M >= 1, got " +
                                shape_string(codes_.shape()));
  }
  if (!(sigma2_ > 0.0) || !std::isfinite(sigma2_)) {
    throw std::invalid_argument("codebook: sigma2 must be positive, got " + std::to_string(sigma2_));
  }
  if (rater_ids_.size() != codes_.dim(0)) {
    throw std::invalid_argument("codebook: " + std::to_string(rater_ids_.size()) + " rater ids for " +
                                std::to_string(codes_.dim(0)) + " code rows");
  }
  if (std::set<std::string>(rater_ids_.begin(), rater_ids_.end()).size() != rater_ids_.size()) {
    throw std::invalid_argument("codebook: rater ids must be unique");
  }
  if (!codes_.all_finite()) throw std::invalid_argument("codebook: non-finite code entry");
}

std::vector<double> LatentCodebook::code(std::size_t rater) const { return codes_.row(rater); }

void LatentCodebook::set_code(std::size_t rater, std::span<const double> values) {
  if (rater >= num_raters() || values.size() != latent_dim()) {
    throw std::invalid_argument("codebook: set_code dimension mismatch");
  }
  for (std::size_t m = 0; m < values.size(); ++m) {
    if (!std::isfinite(values[m])) throw std::invalid_argument("codebook: non-finite code entry");
    codes_.at(rater, m) = values[m];
  }
}

void LatentCodebook::set_codes(Tensor codes) {
  if (codes.shape() != codes_.shape()) {
    throw std::invalid_argument("codebook: replacement codes " + shape_string(codes.shape()) + " do not match " +
                                shape_string(codes_.shape()));
  }
  if (!codes.all_finite()) throw std::invalid_argument("codebook: non-finite code entry");
  codes_ = std::move(codes);
}

std::optional<std::size_t> LatentCodebook::index_of(const std::string& rater_id) const {
  for (std::size_t r = 0; r < rater_ids_.size(); ++r)
    if (rater_ids_[r] == rater_id) return r;
  return std::nullopt;
}

std::size_t LatentCodebook::require_index(const std::string& rater_id) const {
  if (auto r = index_of(rater_id)) return *r;
  throw std::out_of_range("codebook: unknown rater id '" + rater_id + "'");
}

std::vector<std::string> default_rater_ids(std::size_t count) {
  std::vector<std::string> ids;
  ids.reserve(count);
  for (std::size_t r = 0; r < count; ++r) ids.push_back(std::to_string(r));
  return ids;
}

LatentCodebook init_codes(std::size_t num_raters, std::size_t latent_dim, double sigma2, std::uint64_t seed,
                          std::vector<std::string> rater_ids) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("init_codes: sigma2 must be positive");
  if (num_raters < 1 || latent_dim < 1) throw std::invalid_argument("init_codes: R and M must be at least 1");
  if (rater_ids.empty()) rater_ids = default_rater_ids(num_raters);
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(sigma2));
  Tensor codes({num_raters, latent_dim});
  for (std::size_t i = 0; i < codes.numel(); ++i) codes[i] = normal(rng);
  return LatentCodebook(std::move(codes), sigma2, std::move(rater_ids));
}

double prior_penalty(const LatentCodebook& codebook) {
  double acc = 0.0;
  for (double v : codebook.codes().data()) acc += v * v;
  return acc / codebook.sigma2();
}

Var prior_penalty(Tape& tape, Var codes, double sigma2) {
  return tape.scale(tape.sum_squares(codes), 1.0 / sigma2);
}

Var inject_spatial(Tape& tape, Var input, Var kernels, Var bias, Var mixing, Var codes) {
  const Var conv = tape.conv1d(input, kernels, bias);
  const std::size_t channels = tape.value(conv).dim(1);
  if (tape.value(mixing).rank() != 2 || tape.value(mixing).dim(0) != channels) {
    throw std::invalid_argument("inject_spatial: mixing matrix " + shape_string(tape.value(mixing).shape()) +
                                " does not match " + std::to_string(channels) + " output channels");
  }
  return tape.add_replicated(conv, tape.matmul_transposed(codes, mixing));
}

Var inject_dense(Tape& tape, Var input, Var weight, Var bias, Var mixing, Var codes) {
  const Var out = tape.affine(input, weight, bias);
  const std::size_t channels = tape.value(out).dim(1);
  if (tape.value(mixing).rank() != 2 || tape.value(mixing).dim(0) != channels) {
    throw std::invalid_argument("inject_dense: mixing matrix " + shape_string(tape.value(mixing).shape()) +
                                " does not match " + std::to_string(channels) + " output channels");
  }
  return tape.add(out, tape.matmul_transposed(codes, mixing));
}

Tensor replicate_code(std::span<const double> code, std::size_t rows) {
  Tensor out({rows, code.size()});
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t m = 0; m < code.size(); ++m) out.at(i, m) = code[m];
  return out;
}

}  // namespace addle
