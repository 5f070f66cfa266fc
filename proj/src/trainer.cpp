#include "addle/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "addle/metrics.hpp"
#include "addle/ordinal_loss.hpp"
#include "addle/seeds.hpp"

namespace addle {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Tensor rows_of(const Tensor& x, std::span<const std::size_t> rows) {
  const std::size_t d = x.dim(1);
  Tensor out({rows.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) out.at(i, j) = x.at(rows[i], j);
  return out;
}

// Sum of Frank-Hall losses for the given rows, each under its own virtual rater.
double data_loss(const RaterModel& model, const Tensor& inputs, std::span<const int> labels,
                 std::span<const std::size_t> raters) {
  if (inputs.dim(0) == 0) return 0.0;
  const auto sum_rows = [&](const Tensor& logits) {
    double acc = 0.0;
    const std::size_t w = logits.dim(1);
    for (std::size_t i = 0; i < logits.dim(0); ++i) acc += fh_loss(logits.data().subspan(i * w, w), labels[i]);
    return acc;
  };
  switch (model.mode) {
    case TrainMode::jlsl: {
      std::vector<double> per_row(inputs.dim(0));
      for (std::size_t r = 0; r < model.num_raters(); ++r) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < raters.size(); ++i)
          if (raters[i] == r) rows.push_back(i);
        if (rows.empty()) continue;
        const Tensor logits = forward_batch(model.params[r], model.backbone, rows_of(inputs, rows), nullptr);
        const std::size_t w = logits.dim(1);
        for (std::size_t j = 0; j < rows.size(); ++j)
          per_row[rows[j]] = fh_loss(logits.data().subspan(j * w, w), labels[rows[j]]);
      }
      return std::accumulate(per_row.begin(), per_row.end(), 0.0);
    }
    case TrainMode::multi_head:
      return sum_rows(forward_batch(model.params[0], model.backbone, inputs, nullptr, raters));
    case TrainMode::addle:
    case TrainMode::baseline:
      if (model.codebook) {
        Tensor codes({inputs.dim(0), model.backbone.latent_dim});
        for (std::size_t i = 0; i < raters.size(); ++i)
          for (std::size_t m = 0; m < codes.dim(1); ++m) codes.at(i, m) = model.codebook->codes().at(raters[i], m);
        return sum_rows(forward_batch(model.params[0], model.backbone, inputs, &codes));
      }
      return sum_rows(forward_batch(model.params[0], model.backbone, inputs, nullptr));
  }
  throw std::logic_error("trainer: unknown mode");
}

bool scoreable(const Dataset& data) {
  std::set<int> labels;
  for (const auto& s : data.samples) labels.insert(s.label);
  return labels.size() >= 2;
}

double validation_jt(const RaterModel& model, const Dataset& val) {
  if (val.empty() || !scoreable(val)) return kNaN;
  const auto rows = model_rater_indices(model, val);
  const auto scores = own_rater_scores(model, val.feature_matrix(), rows);
  const auto labels = val.labels();
  return jt_index(scores, labels);
}

void momentum_step(Tensor& param, Tensor& velocity, const Tensor& grad, const TrainConfig& cfg) {
  for (std::size_t i = 0; i < param.numel(); ++i) {
    if (cfg.optimizer == Optimizer::momentum) {
      velocity[i] = cfg.momentum * velocity[i] + grad[i];
      param[i] -= cfg.learning_rate * velocity[i];
    } else {
      param[i] -= cfg.learning_rate * grad[i];
    }
  }
}

ModelParams zeros_like(const ModelParams& p) {
  ModelParams z = p;
  for (auto& l : z.layers) {
    l.weight = Tensor(l.weight.shape(), 0.0);
    l.bias = Tensor(l.bias.shape(), 0.0);
  }
  for (auto& a : z.mixing) a = Tensor(a.shape(), 0.0);
  return z;
}

struct SingleRun {
  RaterModel model;
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
};

// Trains one network (one theta, optional codebook) on `train`.
SingleRun train_single(RaterModel model, const Dataset& train, const Dataset& val, const TrainConfig& cfg) {
  if (train.empty()) throw std::invalid_argument("train_joint: training set is empty");
  const std::size_t n = train.size();
  const Tensor inputs = train.feature_matrix();
  const std::vector<int> labels = train.labels();
  const std::vector<std::size_t> raters = model_rater_indices(model, train);
  const bool use_val = !val.empty() && scoreable(val);

  ModelParams velocity = zeros_like(model.params[0]);
  Tensor code_velocity = model.codebook ? Tensor(model.codebook->codes().shape(), 0.0) : Tensor();
  Rng shuffle_rng = make_rng(derive_seed(cfg.seed, 2));

  SingleRun run;
  run.log.push_back({0, objective(model, train), use_val ? validation_jt(model, val) : kNaN});
  run.model = model;
  double best = run.log.back().val_jt;
  std::size_t since_best = 0;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, end - start);
      std::vector<int> batch_labels;
      std::vector<std::size_t> batch_raters;
      for (auto i : batch) {
        batch_labels.push_back(labels[i]);
        batch_raters.push_back(raters[i]);
      }

      Tape tape;
      const ParamVars vars = record_params(tape, model.params[0], true);
      const Var x = tape.constant(rows_of(inputs, batch));
      std::optional<Var> codes, rows;
      if (model.codebook) {
        codes = tape.parameter(model.codebook->codes());
        rows = tape.gather_rows(*codes, batch_raters);
      }
      const std::span<const std::size_t> heads =
          model.mode == TrainMode::multi_head ? std::span<const std::size_t>(batch_raters) : std::span<const std::size_t>{};
      const Var logits = forward_graph(tape, model.backbone, vars, x, rows, heads);
      Var loss = tape.scale(fh_loss_sum(tape, logits, batch_labels), 1.0 / static_cast<double>(batch.size()));
      if (codes) {
        loss = tape.add(loss, tape.scale(prior_penalty(tape, *codes, model.codebook->sigma2()),
                                         1.0 / static_cast<double>(n)));
      }
      tape.backward(loss);

      ModelParams grads;
      collect_grads(tape, vars, grads);
      ModelParams& p = model.params[0];
      for (std::size_t l = 0; l < p.layers.size(); ++l) {
        momentum_step(p.layers[l].weight, velocity.layers[l].weight, grads.layers[l].weight, cfg);
        momentum_step(p.layers[l].bias, velocity.layers[l].bias, grads.layers[l].bias, cfg);
      }
      for (std::size_t a = 0; a < p.mixing.size(); ++a) momentum_step(p.mixing[a], velocity.mixing[a], grads.mixing[a], cfg);
      if (codes) {
        Tensor z = model.codebook->codes();
        momentum_step(z, code_velocity, tape.grad(*codes), cfg);
        if (!z.all_finite()) {
          throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) + ": non-finite latent code");
        }
        model.codebook->set_codes(std::move(z));
      }
    }

    const double obj = objective(model, train);
    if (!std::isfinite(obj) || !model.params[0].all_finite()) {
      throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) + ": objective " +
                               std::to_string(obj));
    }
    const double jt = use_val ? validation_jt(model, val) : kNaN;
    run.log.push_back({epoch, obj, jt});

    if (!use_val) {
      run.model = model;
      run.best_epoch = epoch;
      continue;
    }
    if (jt > best) {
      best = jt;
      since_best = 0;
      run.model = model;
      run.best_epoch = epoch;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return run;
}

RaterModel fresh_model(TrainMode mode, BackboneConfig backbone, const std::vector<std::string>& rater_ids,
                       const TrainConfig& cfg, std::uint64_t seed) {
  RaterModel model;
  model.mode = mode;
  backbone.num_heads = 1;
  if (mode != TrainMode::addle || backbone.latent_dim == 0) backbone.injections.clear();
  if (mode == TrainMode::multi_head) backbone.num_heads = rater_ids.size();
  model.backbone = backbone;
  model.params.push_back(init_params(backbone, derive_seed(seed, 0)));
  if (backbone.has_injections()) {
    model.codebook = init_codes(rater_ids.size(), backbone.latent_dim, cfg.sigma2, derive_seed(seed, 1), rater_ids);
    model.rater_ids = rater_ids;
  } else if (mode == TrainMode::multi_head) {
    model.rater_ids = rater_ids;
  } else {
    model.rater_ids = {kPooledRater};
  }
  return model;
}

Dataset samples_of_rater(const Dataset& data, const std::string& rater_id) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data.rater_ids[data.samples[i].rater] == rater_id) rows.push_back(i);
  return data.subset(rows);
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning_rate must be positive");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be at least 1");
  if (!(sigma2 > 0.0)) throw std::invalid_argument("train: sigma2 must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("train: momentum must lie in [0, 1)");
}

std::vector<std::size_t> model_rater_indices(const RaterModel& model, const Dataset& data) {
  std::vector<std::size_t> out(data.size(), 0);
  const bool pooled = model.num_raters() == 1 && model.rater_ids[0] == kPooledRater;
  if (pooled) return out;
  std::vector<std::size_t> map(data.rater_ids.size());
  std::vector<bool> known(data.rater_ids.size(), false);
  for (std::size_t r = 0; r < data.rater_ids.size(); ++r) {
    if (auto idx = model.index_of(data.rater_ids[r])) {
      map[r] = *idx;
      known[r] = true;
    }
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t r = data.samples[i].rater;
    if (r >= map.size() || !known[r]) {
      throw std::out_of_range("unknown rater '" + (r < data.rater_ids.size() ? data.rater_ids[r] : std::to_string(r)) +
                              "' for sample " + std::to_string(data.samples[i].sample_id));
    }
    out[i] = map[r];
  }
  return out;
}

double objective(const RaterModel& model, const Dataset& data) {
  const auto raters = model_rater_indices(model, data);
  const auto labels = data.labels();
  double total = data_loss(model, data.feature_matrix(), labels, raters);
  if (model.codebook) total += prior_penalty(*model.codebook);
  return total;
}

TrainResult train_joint(const Dataset& train, const Dataset& validation, BackboneConfig backbone,
                        const TrainConfig& cfg) {
  cfg.validate();
  // latent_dim 0 means the latent-free network
  if (backbone.latent_dim == 0) backbone.injections.clear();
  backbone.validate();
  train.validate(backbone.num_classes);
  validation.validate(backbone.num_classes);
  TrainResult result;
  if (cfg.mode != TrainMode::jlsl) {
    SingleRun run = train_single(fresh_model(cfg.mode, backbone, train.rater_ids, cfg, cfg.seed), train, validation, cfg);
    result.model = std::move(run.model);
    result.logs.push_back(std::move(run.log));
    result.best_epochs.push_back(run.best_epoch);
    return result;
  }

  result.model.mode = TrainMode::jlsl;
  result.model.backbone = without_injections(backbone);
  result.model.backbone.num_heads = 1;
  result.model.rater_ids = train.rater_ids;
  for (std::size_t r = 0; r < train.rater_ids.size(); ++r) {
    const std::string& id = train.rater_ids[r];
    TrainConfig sub = cfg;
    sub.mode = TrainMode::baseline;
    sub.seed = cfg.seed + r;
    RaterModel fresh = fresh_model(TrainMode::baseline, backbone, train.rater_ids, sub, sub.seed);
    const Dataset own = samples_of_rater(train, id);
    if (own.empty()) {
      // Nothing to fit: keep the initialization so every rater still has a model.
      result.model.params.push_back(fresh.params[0]);
      result.logs.emplace_back();
      result.best_epochs.push_back(0);
      continue;
    }
    SingleRun run = train_single(std::move(fresh), own, samples_of_rater(validation, id), sub);
    result.model.params.push_back(std::move(run.model.params[0]));
    result.logs.push_back(std::move(run.log));
    result.best_epochs.push_back(run.best_epoch);
  }
  return result;
}

BacktrackingResult backtracking_descent(const ObjectiveFn& eval, std::vector<double> x0, std::size_t max_iterations,
                                        double initial_step, double grad_tolerance) {
  BacktrackingResult res;
  std::vector<double> grad(x0.size());
  double f = eval(x0, &grad);
  res.initial = f;
  double step = initial_step;
  std::vector<double> trial(x0.size()), trial_grad(x0.size());
  for (std::size_t it = 0; it < max_iterations; ++it) {
    double g2 = 0.0;
    for (double g : grad) g2 += g * g;
    if (std::sqrt(g2) <= grad_tolerance) break;
    bool accepted = false;
    for (int halvings = 0; halvings < 60; ++halvings) {
      for (std::size_t i = 0; i < x0.size(); ++i) trial[i] = x0[i] - step * grad[i];
      const double ft = eval(trial, nullptr);
      if (std::isfinite(ft) && ft <= f - 1e-4 * step * g2) {
        accepted = ft < f;
        if (accepted) f = eval(trial, &trial_grad);
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    x0.swap(trial);
    grad.swap(trial_grad);
    ++res.iterations;
    step *= 2.0;
  }
  res.x = std::move(x0);
  res.final = f;
  return res;
}

double rater_objective(const RaterModel& model, const Dataset& data, std::size_t rater) {
  const auto raters = model_rater_indices(model, data);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < raters.size(); ++i)
    if (raters[i] == rater) rows.push_back(i);
  const Dataset own = data.subset(rows);
  std::vector<std::size_t> same(rows.size(), rater);
  double total = data_loss(model, own.feature_matrix(), own.labels(), same);
  if (model.codebook) {
    double sq = 0.0;
    for (double v : model.codebook->code(rater)) sq += v * v;
    total += sq / model.codebook->sigma2();
  }
  return total;
}

FinetuneResult finetune_raters(const RaterModel& model, const Dataset& data, const TrainConfig& cfg) {
  if (model.mode != TrainMode::addle && model.mode != TrainMode::multi_head) {
    throw std::invalid_argument("finetune_raters: only addle and multi-head models have per-rater parameters");
  }
  if (model.mode == TrainMode::addle && !model.codebook) {
    throw std::invalid_argument("finetune_raters: model has no latent codebook");
  }
  FinetuneResult out;
  out.model = model;
  const auto raters = model_rater_indices(model, data);
  const Tensor inputs = data.feature_matrix();
  const std::vector<int> labels = data.labels();
  const std::size_t heads = model.backbone.head_width();

  for (std::size_t r = 0; r < model.num_raters(); ++r) {
    RaterFinetune rep;
    rep.rater_id = model.rater_ids[r];
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < raters.size(); ++i)
      if (raters[i] == r) rows.push_back(i);
    rep.samples = rows.size();
    if (rows.empty()) {
      out.warnings.push_back("rater '" + rep.rater_id + "' has no samples; left unchanged");
      rep.before = rep.after = rater_objective(model, data, r);
      out.raters.push_back(rep);
      continue;
    }
    const Tensor x = rows_of(inputs, rows);
    std::vector<int> y;
    for (auto i : rows) y.push_back(labels[i]);
    const double initial_step = 1.0 / static_cast<double>(rows.size());

    if (model.mode == TrainMode::addle) {
      const ModelParams& theta = model.params[0];
      const double sigma2 = model.codebook->sigma2();
      const std::size_t m = model.backbone.latent_dim;
      const std::vector<std::size_t> zero_rows(rows.size(), 0);
      ObjectiveFn eval = [&](const std::vector<double>& z, std::vector<double>* grad) {
        Tape tape;
        const ParamVars vars = record_params(tape, theta, false);
        const Tensor zt({1, m}, z);
        const Var code = grad ? tape.parameter(zt) : tape.constant(zt);
        const Var logits = forward_graph(tape, model.backbone, vars, tape.constant(x), tape.gather_rows(code, zero_rows));
        const Var loss = tape.add(fh_loss_sum(tape, logits, y), prior_penalty(tape, code, sigma2));
        if (grad) {
          tape.backward(loss);
          const auto g = tape.grad(code).values();
          grad->assign(g.begin(), g.end());
        }
        return tape.value(loss)[0];
      };
      const auto res = backtracking_descent(eval, model.codebook->code(r), cfg.finetune_iterations, initial_step);
      out.model.codebook->set_code(r, res.x);
      rep.before = res.initial;
      rep.after = res.final;
      rep.iterations = res.iterations;
    } else {
      const Tensor features = penultimate_features(model.params[0], model.backbone, x, nullptr);
      const std::size_t width = features.dim(1);
      const LayerParams& head = model.params[0].layers.back();
      std::vector<double> block;
      for (std::size_t h = 0; h < width; ++h)
        for (std::size_t k = 0; k < heads; ++k) block.push_back(head.weight.at(h, r * heads + k));
      for (std::size_t k = 0; k < heads; ++k) block.push_back(head.bias[r * heads + k]);
      ObjectiveFn eval = [&](const std::vector<double>& v, std::vector<double>* grad) {
        Tape tape;
        Tensor w({width, heads}, std::vector<double>(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(width * heads)));
        Tensor b({heads}, std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(width * heads), v.end()));
        const Var wv = grad ? tape.parameter(std::move(w)) : tape.constant(std::move(w));
        const Var bv = grad ? tape.parameter(std::move(b)) : tape.constant(std::move(b));
        const Var loss = fh_loss_sum(tape, tape.affine(tape.constant(features), wv, bv), y);
        if (grad) {
          tape.backward(loss);
          grad->clear();
          for (double g : tape.grad(wv).data()) grad->push_back(g);
          for (double g : tape.grad(bv).data()) grad->push_back(g);
        }
        return tape.value(loss)[0];
      };
      const auto res = backtracking_descent(eval, block, cfg.finetune_iterations, initial_step);
      LayerParams& new_head = out.model.params[0].layers.back();
      for (std::size_t h = 0; h < width; ++h)
        for (std::size_t k = 0; k < heads; ++k) new_head.weight.at(h, r * heads + k) = res.x[h * heads + k];
      for (std::size_t k = 0; k < heads; ++k) new_head.bias[r * heads + k] = res.x[width * heads + k];
      rep.before = res.initial;
      rep.after = res.final;
      rep.iterations = res.iterations;
    }
    out.raters.push_back(rep);
  }
  return out;
}

}  // namespace addle
