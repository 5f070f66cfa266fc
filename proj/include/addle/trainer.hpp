#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "addle/dataset.hpp"
#include "addle/model.hpp"

namespace addle {

enum class Optimizer { sgd, momentum };

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 200;
  // Epochs without a validation improvement before stopping.
  std::size_t patience = 20;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::momentum;
  double momentum = 0.9;
  TrainMode mode = TrainMode::addle;
  double sigma2 = 1.0;
  std::size_t finetune_iterations = 100;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_objective = 0.0;
  double val_jt = 0.0;  // NaN when no validation set is scored
};

struct TrainResult {
  RaterModel model;
  // One log per trained network (R logs for jlsl).
  std::vector<std::vector<EpochRecord>> logs;
  std::vector<std::size_t> best_epochs;
};

// Model rater index of every sample, matched by rater id. Unknown ids throw.
std::vector<std::size_t> model_rater_indices(const RaterModel& model, const Dataset& data);

// Sum over samples of the Frank-Hall loss of f(x_i, z_r(i)) against y_i, plus
// sum_r ||z_r||^2 / sigma^2 when the model has a codebook.
double objective(const RaterModel& model, const Dataset& data);

// Minibatch gradient descent on the objective above (scaled by 1/N), early
// stopping on the validation JT of each sample's own virtual rater against the
// subjective labels. Returns the best-validation parameters. The empty
// validation set disables early stopping. latent_dim 0 drops the injection points.
TrainResult train_joint(const Dataset& train, const Dataset& validation, BackboneConfig backbone,
                        const TrainConfig& cfg);

struct BacktrackingResult {
  std::vector<double> x;
  double initial = 0.0;
  double final = 0.0;
  std::size_t iterations = 0;
};

// Gradient descent where every accepted step satisfies the Armijo condition
// f(x - t g) <= f(x) - 1e-4 t |g|^2, the step size halving until it does.
// `eval` returns f(x) and, when `grad` is non-null, writes the gradient.
using ObjectiveFn = std::function<double(const std::vector<double>& x, std::vector<double>* grad)>;
BacktrackingResult backtracking_descent(const ObjectiveFn& eval, std::vector<double> x0, std::size_t max_iterations,
                                        double initial_step, double grad_tolerance = 1e-10);

struct RaterFinetune {
  std::string rater_id;
  std::size_t samples = 0;
  double before = 0.0;
  double after = 0.0;
  std::size_t iterations = 0;
};

struct FinetuneResult {
  RaterModel model;
  std::vector<RaterFinetune> raters;
  std::vector<std::string> warnings;
};

// Per-rater refit with the shared weights frozen. addle: each code z_r
// minimizes sum_{X_r} loss + ||z_r||^2 / sigma^2. multi-head: each rater's head
// block minimizes sum_{X_r} loss. Raters without samples are left unchanged.
FinetuneResult finetune_raters(const RaterModel& model, const Dataset& data, const TrainConfig& cfg);

// Per-rater objective of the refit above for rater index r.
double rater_objective(const RaterModel& model, const Dataset& data, std::size_t rater);

}  // namespace addle
