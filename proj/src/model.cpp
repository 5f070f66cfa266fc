#include "addle/model.hpp"

#include <stdexcept>

#include "addle/ordinal_loss.hpp"

namespace addle {

std::string mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::addle: return "addle";
    case TrainMode::baseline: return "baseline";
    case TrainMode::multi_head: return "multi-head";
    case TrainMode::jlsl: return "jlsl";
  }
  return "unknown";
}

TrainMode parse_mode(const std::string& name) {
  if (name == "addle") return TrainMode::addle;
  if (name == "baseline" || name == "baseline-no-latent") return TrainMode::baseline;
  if (name == "multi-head" || name == "multihead") return TrainMode::multi_head;
  if (name == "jlsl") return TrainMode::jlsl;
  throw std::invalid_argument("unknown mode '" + name + "' (expected addle, baseline, multi-head or jlsl)");
}

std::optional<std::size_t> RaterModel::index_of(const std::string& rater_id) const {
  for (std::size_t r = 0; r < rater_ids.size(); ++r)
    if (rater_ids[r] == rater_id) return r;
  return std::nullopt;
}

std::size_t RaterModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.count();
  if (codebook) n += codebook->codes().numel();
  return n;
}

void RaterModel::validate() const {
  backbone.validate();
  if (rater_ids.empty()) throw std::invalid_argument("model: at least one virtual rater is required");
  const std::size_t expected_params = mode == TrainMode::jlsl ? rater_ids.size() : 1;
  if (params.size() != expected_params) {
    throw std::invalid_argument("model: " + mode_name(mode) + " expects " + std::to_string(expected_params) +
                                " parameter sets, got " + std::to_string(params.size()));
  }
  for (const auto& p : params) p.check_against(backbone);
  const bool latent = backbone.has_injections();
  if (latent != codebook.has_value()) throw std::invalid_argument("model: codebook presence must match injection points");
  if (latent && mode != TrainMode::addle) throw std::invalid_argument("model: only addle models carry latent codes");
  if (codebook) {
    if (codebook->latent_dim() != backbone.latent_dim) throw std::invalid_argument("model: codebook width != latent_dim");
    if (codebook->rater_ids() != rater_ids) throw std::invalid_argument("model: codebook rater ids differ from model");
  }
  if (mode == TrainMode::multi_head && backbone.num_heads != rater_ids.size()) {
    throw std::invalid_argument("model: multi-head needs one head per rater");
  }
  if (mode != TrainMode::multi_head && backbone.num_heads != 1) {
    throw std::invalid_argument("model: only multi-head models have several heads");
  }
}

std::vector<double> rater_scores(const RaterModel& model, const Tensor& inputs, std::size_t rater) {
  if (rater >= model.num_raters()) {
    throw std::out_of_range("model: rater " + std::to_string(rater) + " out of range (" +
                            std::to_string(model.num_raters()) + " raters)");
  }
  const std::size_t n = inputs.dim(0);
  switch (model.mode) {
    case TrainMode::jlsl:
      return severity_scores(forward_batch(model.params[rater], model.backbone, inputs, nullptr));
    case TrainMode::multi_head: {
      const std::vector<std::size_t> heads(n, rater);
      return severity_scores(forward_batch(model.params[0], model.backbone, inputs, nullptr, heads));
    }
    case TrainMode::addle:
    case TrainMode::baseline:
      if (model.codebook) return code_scores(model, inputs, model.codebook->code(rater));
      return severity_scores(forward_batch(model.params[0], model.backbone, inputs, nullptr));
  }
  throw std::logic_error("model: unknown mode");
}

double predict_rater(const RaterModel& model, std::span<const double> x, std::size_t rater) {
  const Tensor inputs({1, x.size()}, std::vector<double>(x.begin(), x.end()));
  return rater_scores(model, inputs, rater)[0];
}

std::vector<double> code_scores(const RaterModel& model, const Tensor& inputs, std::span<const double> code) {
  if (!model.backbone.has_injections()) throw std::invalid_argument("model: no injection points to condition on");
  const Tensor codes = replicate_code(code, inputs.dim(0));
  return severity_scores(forward_batch(model.params[0], model.backbone, inputs, &codes));
}

std::vector<std::vector<double>> score_matrix(const RaterModel& model, const Tensor& inputs) {
  std::vector<std::vector<double>> out;
  out.reserve(model.num_raters());
  for (std::size_t r = 0; r < model.num_raters(); ++r) out.push_back(rater_scores(model, inputs, r));
  return out;
}

std::vector<double> own_rater_scores(const RaterModel& model, const Tensor& inputs,
                                     std::span<const std::size_t> model_raters) {
  const std::size_t n = inputs.dim(0);
  if (model_raters.size() != n) throw std::invalid_argument("model: one rater per input row is required");
  for (auto r : model_raters)
    if (r >= model.num_raters()) throw std::out_of_range("model: rater index out of range");
  switch (model.mode) {
    case TrainMode::baseline:
      return rater_scores(model, inputs, 0);
    case TrainMode::addle: {
      if (!model.codebook) return rater_scores(model, inputs, 0);
      Tensor codes({n, model.backbone.latent_dim});
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t m = 0; m < model.backbone.latent_dim; ++m)
          codes.at(i, m) = model.codebook->codes().at(model_raters[i], m);
      return severity_scores(forward_batch(model.params[0], model.backbone, inputs, &codes));
    }
    case TrainMode::multi_head:
      return severity_scores(forward_batch(model.params[0], model.backbone, inputs, nullptr, model_raters));
    case TrainMode::jlsl: {
      std::vector<double> out(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto row = inputs.row(i);
        out[i] = predict_rater(model, row, model_raters[i]);
      }
      return out;
    }
  }
  throw std::logic_error("model: unknown mode");
}

}  // namespace addle
