#include "addle/backbone.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "addle/seeds.hpp"

namespace addle {

namespace {

constexpr double kMixingInitStd = 0.1;

std::size_t conv_output_length(const BackboneConfig& cfg) { return cfg.input_dim - cfg.conv->kernel + 1; }

// Width of the flattened input seen by a dense layer.
std::size_t dense_input_width(const BackboneConfig& cfg, std::size_t layer) {
  const std::size_t first_dense = cfg.conv ? 1 : 0;
  if (layer == first_dense) return cfg.conv ? cfg.conv->channels * conv_output_length(cfg) : cfg.input_dim;
  return cfg.layer_width(layer - 1);
}

}  // namespace

std::string format_injections(const std::vector<InjectionPoint>& points) {
  std::string out;
  for (const auto& p : points) {
    if (!out.empty()) out += ',';
    out += std::to_string(p.layer_index) + (p.mode == InjectionMode::dense ? ":dense" : ":spatial");
  }
  return out;
}

std::vector<InjectionPoint> parse_injections(const std::string& text) {
  std::vector<InjectionPoint> out;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    std::string item = text.substr(start, end - start);
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    start = end + 1;
    if (item.empty()) continue;
    const std::size_t colon = item.find(':');
    if (colon == std::string::npos) {
      throw std::invalid_argument("injection '" + item + "' must look like <layer>:dense or <layer>:spatial");
    }
    const std::string layer = item.substr(0, colon);
    const std::string mode = item.substr(colon + 1);
    if (layer.empty() || layer.find_first_not_of("0123456789") != std::string::npos) {
      throw std::invalid_argument("injection '" + item + "' has a non-numeric layer index");
    }
    InjectionPoint p;
    p.layer_index = std::stoul(layer);
    if (mode == "dense") {
      p.mode = InjectionMode::dense;
    } else if (mode == "spatial") {
      p.mode = InjectionMode::spatial;
    } else {
      throw std::invalid_argument("injection '" + item + "' has unknown mode '" + mode + "'");
    }
    out.push_back(p);
  }
  return out;
}

std::size_t BackboneConfig::layer_width(std::size_t layer) const {
  if (layer >= num_layers()) throw std::out_of_range("backbone: layer " + std::to_string(layer) + " out of range");
  if (is_conv_layer(layer)) return conv->channels;
  const std::size_t dense_index = layer - (conv ? 1 : 0);
  if (dense_index < hidden.size()) return hidden[dense_index];
  return num_heads * head_width();
}

void BackboneConfig::validate() const {
  if (input_dim < 1) throw std::invalid_argument("backbone: input_dim must be at least 1");
  if (num_classes < 2) throw std::invalid_argument("backbone: num_classes must be at least 2");
  if (num_heads < 1) throw std::invalid_argument("backbone: num_heads must be at least 1");
  for (std::size_t w : hidden)
    if (w < 1) throw std::invalid_argument("backbone: hidden widths must be positive");
  if (conv) {
    if (conv->channels < 1) throw std::invalid_argument("backbone: conv channels must be positive");
    if (conv->kernel < 1 || conv->kernel > input_dim) {
      throw std::invalid_argument("backbone: conv kernel " + std::to_string(conv->kernel) +
                                  " must lie in [1, input_dim]");
    }
  }
  if (!injections.empty() && latent_dim < 1) {
    throw std::invalid_argument("backbone: injection points need latent_dim >= 1");
  }
  std::vector<bool> used(num_layers(), false);
  for (const auto& p : injections) {
    if (p.layer_index >= num_layers()) {
      throw std::invalid_argument("backbone: injection layer " + std::to_string(p.layer_index) + " out of range [0, " +
                                  std::to_string(num_layers()) + ")");
    }
    if (used[p.layer_index]) {
      throw std::invalid_argument("backbone: more than one injection point at layer " + std::to_string(p.layer_index));
    }
    used[p.layer_index] = true;
    const bool conv_layer = is_conv_layer(p.layer_index);
    if (conv_layer != (p.mode == InjectionMode::spatial)) {
      throw std::invalid_argument("backbone: layer " + std::to_string(p.layer_index) + " requires " +
                                  (conv_layer ? "spatial" : "dense") + " injection");
    }
  }
}

std::size_t ModelParams::count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.numel() + l.bias.numel();
  for (const auto& a : mixing) n += a.numel();
  return n;
}

bool ModelParams::all_finite() const {
  for (const auto& l : layers)
    if (!l.weight.all_finite() || !l.bias.all_finite()) return false;
  for (const auto& a : mixing)
    if (!a.all_finite()) return false;
  return true;
}

void ModelParams::check_against(const BackboneConfig& cfg) const {
  cfg.validate();
  const ModelParams ref = init_params(cfg, 0);
  auto fail = [](const std::string& what) { throw std::invalid_argument("model params: " + what); };
  if (layers.size() != ref.layers.size()) fail("layer count does not match config");
  if (mixing.size() != ref.mixing.size()) fail("mixing matrix count does not match injection points");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].weight.shape() != ref.layers[i].weight.shape() ||
        layers[i].bias.shape() != ref.layers[i].bias.shape()) {
      fail("layer " + std::to_string(i) + " shape mismatch");
    }
  }
  for (std::size_t i = 0; i < mixing.size(); ++i)
    if (mixing[i].shape() != ref.mixing[i].shape()) fail("mixing matrix " + std::to_string(i) + " shape mismatch");
  if (!all_finite()) fail("non-finite entry");
}

ModelParams init_params(const BackboneConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng = make_rng(seed);
  ModelParams p;
  for (std::size_t layer = 0; layer < cfg.num_layers(); ++layer) {
    LayerParams lp;
    const std::size_t out = cfg.layer_width(layer);
    if (cfg.is_conv_layer(layer)) {
      std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(cfg.conv->kernel)));
      lp.weight = Tensor({out, 1, cfg.conv->kernel});
      for (std::size_t i = 0; i < lp.weight.numel(); ++i) lp.weight[i] = normal(rng);
    } else {
      const std::size_t in = dense_input_width(cfg, layer);
      std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(in)));
      lp.weight = Tensor({in, out});
      for (std::size_t i = 0; i < lp.weight.numel(); ++i) lp.weight[i] = normal(rng);
    }
    lp.bias = Tensor({out}, 0.0);
    p.layers.push_back(std::move(lp));
  }
  std::normal_distribution<double> mix(0.0, kMixingInitStd);
  for (const auto& point : cfg.injections) {
    Tensor a({cfg.layer_width(point.layer_index), cfg.latent_dim});
    for (std::size_t i = 0; i < a.numel(); ++i) a[i] = mix(rng);
    p.mixing.push_back(std::move(a));
  }
  return p;
}

std::size_t parameter_count(const BackboneConfig& cfg) {
  cfg.validate();
  std::size_t n = 0;
  for (std::size_t layer = 0; layer < cfg.num_layers(); ++layer) {
    const std::size_t out = cfg.layer_width(layer);
    const std::size_t fan_in = cfg.is_conv_layer(layer) ? cfg.conv->kernel : dense_input_width(cfg, layer);
    n += fan_in * out + out;
  }
  for (const auto& point : cfg.injections) n += cfg.layer_width(point.layer_index) * cfg.latent_dim;
  return n;
}

BackboneConfig without_injections(BackboneConfig cfg) {
  cfg.injections.clear();
  return cfg;
}

ModelParams without_injections(ModelParams params) {
  params.mixing.clear();
  return params;
}

ParamVars record_params(Tape& tape, const ModelParams& params, bool trainable) {
  ParamVars v;
  auto rec = [&](const Tensor& t) { return trainable ? tape.parameter(t) : tape.constant(t); };
  for (const auto& l : params.layers) {
    v.weights.push_back(rec(l.weight));
    v.biases.push_back(rec(l.bias));
  }
  for (const auto& a : params.mixing) v.mixing.push_back(rec(a));
  return v;
}

void collect_grads(const Tape& tape, const ParamVars& vars, ModelParams& grads) {
  grads.layers.resize(vars.weights.size());
  for (std::size_t i = 0; i < vars.weights.size(); ++i) {
    grads.layers[i].weight = tape.grad(vars.weights[i]);
    grads.layers[i].bias = tape.grad(vars.biases[i]);
  }
  grads.mixing.resize(vars.mixing.size());
  for (std::size_t i = 0; i < vars.mixing.size(); ++i) grads.mixing[i] = tape.grad(vars.mixing[i]);
}

namespace {

Var run_layers(Tape& tape, const BackboneConfig& cfg, const ParamVars& params, Var inputs, std::optional<Var> codes,
               std::span<const std::size_t> heads, bool include_head) {
  const Tensor& x = tape.value(inputs);
  if (x.rank() != 2 || x.dim(1) != cfg.input_dim) {
    throw std::invalid_argument("backbone: inputs " + shape_string(x.shape()) + " do not match input_dim " +
                                std::to_string(cfg.input_dim));
  }
  if (params.weights.size() != cfg.num_layers() || params.mixing.size() != cfg.injections.size()) {
    throw std::invalid_argument("backbone: parameters do not match config");
  }
  const std::size_t batch = x.dim(0);
  if (cfg.has_injections()) {
    if (!codes) throw std::invalid_argument("backbone: latent codes are required by the injection points");
    const Tensor& z = tape.value(*codes);
    if (z.rank() != 2 || z.dim(0) != batch || z.dim(1) != cfg.latent_dim) {
      throw std::invalid_argument("backbone: codes " + shape_string(z.shape()) + " do not match batch " +
                                  std::to_string(batch) + " x latent_dim " + std::to_string(cfg.latent_dim));
    }
  }
  if (include_head && cfg.num_heads > 1 && heads.size() != batch) {
    throw std::invalid_argument("backbone: multi-head forward needs one head index per row");
  }

  auto injection_at = [&](std::size_t layer) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < cfg.injections.size(); ++i)
      if (cfg.injections[i].layer_index == layer) return i;
    return std::nullopt;
  };

  Var h = inputs;
  const std::size_t layers = include_head ? cfg.num_layers() : cfg.num_layers() - 1;
  for (std::size_t layer = 0; layer < layers; ++layer) {
    const auto point = injection_at(layer);
    const Var w = params.weights[layer];
    const Var b = params.biases[layer];
    if (cfg.is_conv_layer(layer)) {
      const Var maps = tape.reshape(h, {batch, 1, cfg.input_dim});
      h = point ? inject_spatial(tape, maps, w, b, params.mixing[*point], *codes) : tape.conv1d(maps, w, b);
      h = tape.relu(h);
      h = tape.reshape(h, {batch, cfg.conv->channels * conv_output_length(cfg)});
      continue;
    }
    h = point ? inject_dense(tape, h, w, b, params.mixing[*point], *codes) : tape.affine(h, w, b);
    if (layer + 1 < cfg.num_layers()) h = tape.relu(h);
  }
  if (include_head && cfg.num_heads > 1) h = tape.select_blocks(h, heads, cfg.head_width());
  return h;
}

}  // namespace

Var forward_graph(Tape& tape, const BackboneConfig& cfg, const ParamVars& params, Var inputs,
                  std::optional<Var> codes, std::span<const std::size_t> heads) {
  return run_layers(tape, cfg, params, inputs, codes, heads, true);
}

Tensor penultimate_features(const ModelParams& params, const BackboneConfig& cfg, const Tensor& inputs,
                            const Tensor* codes) {
  Tape tape;
  const ParamVars vars = record_params(tape, params, false);
  const Var x = tape.constant(inputs);
  std::optional<Var> z;
  if (codes) z = tape.constant(*codes);
  return tape.value(run_layers(tape, cfg, vars, x, z, {}, false));
}

Tensor forward_batch(const ModelParams& params, const BackboneConfig& cfg, const Tensor& inputs, const Tensor* codes,
                     std::span<const std::size_t> heads) {
  Tape tape;
  const ParamVars vars = record_params(tape, params, false);
  const Var x = tape.constant(inputs);
  std::optional<Var> z;
  if (codes) z = tape.constant(*codes);
  return tape.value(forward_graph(tape, cfg, vars, x, z, heads));
}

std::vector<double> forward(const ModelParams& params, const BackboneConfig& cfg, std::span<const double> x,
                            std::span<const double> code, std::size_t head) {
  const Tensor inputs({1, x.size()}, std::vector<double>(x.begin(), x.end()));
  const std::size_t heads[] = {head};
  std::span<const std::size_t> head_span = cfg.num_heads > 1 ? std::span<const std::size_t>(heads) : std::span<const std::size_t>{};
  if (!cfg.has_injections()) return forward_batch(params, cfg, inputs, nullptr, head_span).values();
  const Tensor z({1, code.size()}, std::vector<double>(code.begin(), code.end()));
  return forward_batch(params, cfg, inputs, &z, head_span).values();
}

}  // namespace addle
