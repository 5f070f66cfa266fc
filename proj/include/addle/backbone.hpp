#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "addle/latent_codebook.hpp"
#include "addle/tape.hpp"

namespace addle {

struct ConvFrontEnd {
  std::size_t channels = 4;
  std::size_t kernel = 3;

  friend bool operator==(const ConvFrontEnd&, const ConvFrontEnd&) = default;
};

// Layer stack: [conv1d front-end] -> hidden dense layers -> ordinal head.
// Layer indices count the optional conv layer first. Every layer but the head
// is followed by a rectifier.
struct BackboneConfig {
  std::size_t input_dim = 16;
  std::vector<std::size_t> hidden = {32, 32};
  std::size_t num_classes = 4;
  std::size_t latent_dim = 10;
  std::vector<InjectionPoint> injections = {{1, InjectionMode::dense}};
  std::optional<ConvFrontEnd> conv;
  // One K-1 logit block per head; >1 only for the multi-head baseline.
  std::size_t num_heads = 1;

  std::size_t num_layers() const { return (conv ? 1 : 0) + hidden.size() + 1; }
  bool is_conv_layer(std::size_t layer) const { return conv.has_value() && layer == 0; }
  // Channels (conv) or units (dense) produced by a layer.
  std::size_t layer_width(std::size_t layer) const;
  std::size_t head_width() const { return num_classes - 1; }
  bool has_injections() const { return !injections.empty(); }

  // Throws std::invalid_argument describing the first violated invariant.
  void validate() const;

  friend bool operator==(const BackboneConfig&, const BackboneConfig&) = default;
};

// Text form of injection points, e.g. "1:dense,0:spatial"; empty for none.
std::string format_injections(const std::vector<InjectionPoint>& points);
std::vector<InjectionPoint> parse_injections(const std::string& text);

struct LayerParams {
  Tensor weight;  // dense: [in x out]; conv: [channels x 1 x kernel]
  Tensor bias;

  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

// Shared weights theta: layer weights plus one mixing matrix per injection point.
struct ModelParams {
  std::vector<LayerParams> layers;
  std::vector<Tensor> mixing;

  std::size_t count() const;
  bool all_finite() const;
  void check_against(const BackboneConfig& cfg) const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// He-normal weights, zero biases, N(0, 0.1^2) mixing entries.
ModelParams init_params(const BackboneConfig& cfg, std::uint64_t seed);

// Analytic parameter count of theta (codes excluded).
std::size_t parameter_count(const BackboneConfig& cfg);

// The same architecture with all injection points removed.
BackboneConfig without_injections(BackboneConfig cfg);
ModelParams without_injections(ModelParams params);

struct ParamVars {
  std::vector<Var> weights;
  std::vector<Var> biases;
  std::vector<Var> mixing;
};

ParamVars record_params(Tape& tape, const ModelParams& params, bool trainable);
void collect_grads(const Tape& tape, const ParamVars& vars, ModelParams& grads);

// Records f_theta(X, Z) on the tape and returns the [B x (K-1)] logits.
// `codes` ([B x M], one row per sample) is required iff the config has injection
// points; `heads` selects the head block per row and is required iff num_heads > 1.
Var forward_graph(Tape& tape, const BackboneConfig& cfg, const ParamVars& params, Var inputs,
                  std::optional<Var> codes, std::span<const std::size_t> heads = {});

// Activations feeding the head layer, [B x width].
Tensor penultimate_features(const ModelParams& params, const BackboneConfig& cfg, const Tensor& inputs,
                            const Tensor* codes);

Tensor forward_batch(const ModelParams& params, const BackboneConfig& cfg, const Tensor& inputs,
                     const Tensor* codes, std::span<const std::size_t> heads = {});

// Single sample convenience form; `code` may be empty for latent-free configs.
std::vector<double> forward(const ModelParams& params, const BackboneConfig& cfg, std::span<const double> x,
                            std::span<const double> code, std::size_t head = 0);

}  // namespace addle
