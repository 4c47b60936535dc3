#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dgon/autodiff.hpp"
#include "dgon/graph.hpp"
#include "dgon/params.hpp"
#include "dgon/sampling.hpp"
#include "dgon/tensor.hpp"

namespace dgon {

enum class ModelVariant { standard, resolution_independent };

ModelVariant parse_variant(const std::string& name);
std::string to_string(ModelVariant variant);
WindowMode window_mode(ModelVariant variant);

struct ModelConfig {
  std::size_t gnn_layers = 4;
  std::size_t gnn_width = 64;
  std::size_t trunk_layers = 3;
  std::size_t trunk_width = 64;
  std::size_t latent_dim = 32;  // q
  Activation activation = Activation::tanh;
  ModelVariant variant = ModelVariant::standard;
  std::size_t sensors = 51;     // m
  double memory_length = 0.05;  // t_M, seconds
  double horizon = 0.02;        // h, seconds

  /// Twenty message-passing layers, five trunk layers, 100-wide outputs.
  static ModelConfig reference();

  /// Per-node input width of the first branch layer: m (standard) or 2*floor(m/2).
  std::size_t feature_width() const;
  /// Sensors present in one window for this variant.
  std::size_t window_sensors() const;
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

std::string model_config_to_json(const ModelConfig& cfg);
/// Throws ConfigError on unknown keys or invalid values.
ModelConfig model_config_from_json(const std::string& text);

/// Anything that maps a memory window and query offsets to node states.
class Predictor {
 public:
  virtual ~Predictor() = default;
  /// Returns [queries x nodes]; row k is the predicted state at t + queries[k].
  virtual Tensor predict(const Graph& g, const MemoryWindow& window,
                         std::span<const double> queries) const = 0;
};

/// Weights of one message-passing layer.
struct GnnLayerWeights {
  Tensor w_self;   // W1 [out x in]
  Tensor w_neigh;  // W2 [out x in]
  Tensor bias;     // [out]
};

/// Batched neighbor mean: `x` stacks blocks of g.node_count() rows, one per window.
Var neighbor_mean(const Graph& g, Var x);

/// σ(H W1^T + mean_{j∈N(i)}(H_j) W2^T + b) for every node row of H.
Var message_passing(Var w_self, Var w_neigh, Var bias, const Graph& g, Var H, Activation act);
Tensor mp_layer(const GnnLayerWeights& layer, const Graph& g, const Tensor& H, Activation act);

/// Per-node dot product of coefficients [n x q] with basis [q].
Tensor merge(const Tensor& coeffs, const Tensor& basis);

/// Branch GNN + trunk MLP operator network. The parameter shapes depend only on
/// the configuration, never on the graph, so one instance serves any graph.
class DeepGraphONet : public Predictor {
 public:
  DeepGraphONet(ModelConfig cfg, std::uint64_t seed);
  /// Adopts existing parameters; throws FormatError if names or shapes differ from `cfg`.
  DeepGraphONet(ModelConfig cfg, ParamStore params);

  const ModelConfig& config() const noexcept { return config_; }
  ParamStore& params() noexcept { return params_; }
  const ParamStore& params() const noexcept { return params_; }

  /// Allow trunk queries outside [0, h].
  void set_allow_extrapolation(bool allow) noexcept { allow_extrapolation_ = allow; }

  /// Per-node branch input [n x feature_width] built from a window.
  Tensor node_features(const MemoryWindow& window) const;

  // Differentiable path used by training. `features` stacks W windows
  // ([W*n x f]); query k (seconds) reads window query_window[k]. Returns [Q x n].
  Var forward(Tape& tape, const Graph& g, const Tensor& features, std::span<const double> queries,
              std::span<const std::size_t> query_window);
  Var branch(Tape& tape, const Graph& g, Var features);
  Var trunk(Tape& tape, std::span<const double> queries);

  // Inference helpers (no parameter gradients).
  Tensor branch_forward(const Graph& g, const MemoryWindow& window) const;  // [n x q]
  Tensor trunk_forward(double query) const;                                // [q]
  Tensor forward(const Graph& g, const MemoryWindow& window, double query) const;  // [n]
  Tensor predict(const Graph& g, const MemoryWindow& window,
                 std::span<const double> queries) const override;
  /// Batched inference over several windows on one graph; returns [Q x n].
  Tensor predict_batch(const Graph& g, const Tensor& features, std::span<const double> queries,
                       std::span<const std::size_t> query_window) const;

  /// Identifier of the graph the weights were trained on (informational).
  const std::string& train_graph_id() const noexcept { return train_graph_id_; }
  void set_train_graph_id(std::string id) { train_graph_id_ = std::move(id); }

 private:
  struct Layer {
    ParamId w_self, w_neigh, bias;
  };
  struct Dense {
    ParamId weight, bias;
  };

  void declare_params(const std::uint64_t* seed);
  void check_queries(std::span<const double> queries) const;
  Tensor normalized_queries(std::span<const double> queries) const;
  template <typename ParamFn>
  Var branch_impl(Tape& tape, const Graph& g, Var features, ParamFn&& param) const;
  template <typename ParamFn>
  Var trunk_impl(Tape& tape, std::span<const double> queries, ParamFn&& param) const;

  ModelConfig config_;
  ParamStore params_;
  std::vector<Layer> branch_layers_;
  std::vector<Dense> trunk_layers_;
  bool allow_extrapolation_ = false;
  std::string train_graph_id_;
};

/// Stacks node features of several windows into [W*n x f].
Tensor stack_features(const DeepGraphONet& model, std::span<const MemoryWindow* const> windows);

}  // namespace dgon
