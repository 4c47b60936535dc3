#include "dgon/model.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "dgon/errors.hpp"
#include "dgon/random.hpp"

namespace dgon {

ModelVariant parse_variant(const std::string& name) {
  if (name == "standard") return ModelVariant::standard;
  if (name == "resolution_independent") return ModelVariant::resolution_independent;
  throw ConfigError("unknown model variant '" + name + "'");
}

std::string to_string(ModelVariant variant) {
  return variant == ModelVariant::standard ? "standard" : "resolution_independent";
}

WindowMode window_mode(ModelVariant variant) {
  return variant == ModelVariant::standard ? WindowMode::fixed : WindowMode::random;
}

ModelConfig ModelConfig::reference() {
  ModelConfig cfg;
  cfg.gnn_layers = 20;
  cfg.gnn_width = 100;
  cfg.trunk_layers = 5;
  cfg.trunk_width = 100;
  cfg.latent_dim = 100;
  return cfg;
}

std::size_t ModelConfig::window_sensors() const {
  return variant == ModelVariant::standard ? sensors : sensors / 2;
}

std::size_t ModelConfig::feature_width() const {
  return variant == ModelVariant::standard ? sensors : 2 * (sensors / 2);
}

void ModelConfig::validate() const {
  if (latent_dim < 1) throw ConfigError("latent_dim must be at least 1");
  if (gnn_layers < 1 || trunk_layers < 1) throw ConfigError("layer counts must be at least 1");
  if (gnn_width < 1 || trunk_width < 1) throw ConfigError("hidden widths must be at least 1");
  if (sensors < 2) throw ConfigError("sensor count m must be at least 2");
  if (!(memory_length > 0.0) || !(horizon > 0.0)) {
    throw ConfigError("memory length and horizon must be positive");
  }
}

// --- differentiable building blocks -------------------------------------------------------

Var neighbor_mean(const Graph& g, Var x) {
  Tape& tape = x.tape();
  const Tensor& xv = x.value();
  const std::size_t n = g.node_count();
  if (n == 0 || xv.rank() != 2 || xv.rows() % n != 0) {
    throw DimensionError("neighbor_mean: input " + xv.shape_string() + " is not a stack of " +
                         std::to_string(n) + "-node blocks");
  }
  const std::size_t blocks = xv.rows() / n;
  const std::size_t d = xv.cols();
  Tensor y({xv.rows(), d});
  for (std::size_t b = 0; b < blocks; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto nbrs = g.neighbors(i);
      if (nbrs.empty()) continue;
      double* dst = &y(b * n + i, 0);
      for (std::size_t j : nbrs) {
        const double* src = xv.row(b * n + j).data();
        for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
      }
      const double inv = 1.0 / static_cast<double>(nbrs.size());
      for (std::size_t c = 0; c < d; ++c) dst[c] *= inv;
    }
  }
  return tape.record(std::move(y), tape.requires_grad(x),
                     [x, &g, n, blocks, d](Tape& t, const Tensor& gy) {
                       Tensor& gx = t.grad_buffer(x);
                       for (std::size_t b = 0; b < blocks; ++b) {
                         for (std::size_t i = 0; i < n; ++i) {
                           const auto nbrs = g.neighbors(i);
                           if (nbrs.empty()) continue;
                           const double inv = 1.0 / static_cast<double>(nbrs.size());
                           const double* src = gy.row(b * n + i).data();
                           for (std::size_t j : nbrs) {
                             double* dst = &gx(b * n + j, 0);
                             for (std::size_t c = 0; c < d; ++c) dst[c] += inv * src[c];
                           }
                         }
                       }
                     });
}

Var message_passing(Var w_self, Var w_neigh, Var bias, const Graph& g, Var H, Activation act) {
  const Tensor& h = H.value();
  if (h.rank() != 2 || h.cols() != w_self.value().cols()) {
    throw DimensionError("message passing layer expects width " +
                         std::to_string(w_self.value().cols()) + ", got input " +
                         h.shape_string());
  }
  Var self_term = affine(w_self, bias, H);
  Var neigh_term = linear(w_neigh, neighbor_mean(g, H));
  return activate(add(self_term, neigh_term), act);
}

Tensor mp_layer(const GnnLayerWeights& layer, const Graph& g, const Tensor& H, Activation act) {
  Tape tape;
  Var out = message_passing(tape.constant(layer.w_self), tape.constant(layer.w_neigh),
                            tape.constant(layer.bias), g, tape.constant(H), act);
  return out.value();
}

Tensor merge(const Tensor& coeffs, const Tensor& basis) {
  if (coeffs.rank() != 2 || basis.rank() != 1 || coeffs.cols() != basis.size()) {
    throw DimensionError("merge: coefficients " + coeffs.shape_string() + " and basis " +
                         basis.shape_string() + " do not conform");
  }
  Tensor out({coeffs.rows()});
  for (std::size_t i = 0; i < coeffs.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < basis.size(); ++j) acc += coeffs(i, j) * basis[j];
    out[i] = acc;
  }
  return out;
}

// --- DeepGraphONet --------------------------------------------------------------------------

DeepGraphONet::DeepGraphONet(ModelConfig cfg, std::uint64_t seed) : config_(cfg) {
  config_.validate();
  declare_params(&seed);
}

DeepGraphONet::DeepGraphONet(ModelConfig cfg, ParamStore params) : config_(cfg) {
  config_.validate();
  declare_params(nullptr);
  if (params.size() != params_.size()) {
    throw FormatError("expected " + std::to_string(params_.size()) + " parameter tensors, got " +
                      std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const ParamId id{i};
    const auto other = params.find(params_.name(id));
    if (!other) throw FormatError("missing parameter '" + params_.name(id) + "'");
    const Tensor& v = params.value(*other);
    if (v.shape() != params_.value(id).shape()) {
      throw FormatError("parameter '" + params_.name(id) + "' has shape " + v.shape_string() +
                        ", expected " + params_.value(id).shape_string());
    }
    params_.value(id) = v;
  }
}

void DeepGraphONet::declare_params(const std::uint64_t* seed) {
  std::optional<Rng> rng;
  if (seed != nullptr) rng.emplace(*seed);
  auto make = [&](std::vector<std::size_t> shape, std::size_t fan_in) {
    Tensor t(std::move(shape));
    if (rng) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (double& v : t.data()) v = rng->uniform(-bound, bound);
    }
    return t;
  };
  std::size_t width_in = config_.feature_width();
  for (std::size_t l = 0; l < config_.gnn_layers; ++l) {
    const bool last = l + 1 == config_.gnn_layers;
    const std::size_t width_out = last ? config_.latent_dim : config_.gnn_width;
    const std::string prefix = "branch." + std::to_string(l) + ".";
    Layer layer;
    layer.w_self = params_.add(prefix + "w_self", make({width_out, width_in}, width_in));
    layer.w_neigh = params_.add(prefix + "w_neigh", make({width_out, width_in}, width_in));
    layer.bias = params_.add(prefix + "bias", make({width_out}, width_in));
    branch_layers_.push_back(layer);
    width_in = width_out;
  }
  width_in = 1;
  for (std::size_t l = 0; l < config_.trunk_layers; ++l) {
    const bool last = l + 1 == config_.trunk_layers;
    const std::size_t width_out = last ? config_.latent_dim : config_.trunk_width;
    const std::string prefix = "trunk." + std::to_string(l) + ".";
    Dense dense;
    dense.weight = params_.add(prefix + "weight", make({width_out, width_in}, width_in));
    dense.bias = params_.add(prefix + "bias", make({width_out}, width_in));
    trunk_layers_.push_back(dense);
    width_in = width_out;
  }
}

Tensor DeepGraphONet::node_features(const MemoryWindow& window) const {
  const std::size_t expected = config_.window_sensors();
  if (window.sensor_count() != expected || window.values.cols() != expected) {
    throw DimensionError("variant/feature-layout mismatch: " + to_string(config_.variant) +
                         " model expects " + std::to_string(expected) +
                         " sensors per window, got " + std::to_string(window.sensor_count()));
  }
  if (std::abs(window.memory_length - config_.memory_length) >
      1e-9 * std::max(1.0, config_.memory_length)) {
    throw CompatibilityError("window memory length " + std::to_string(window.memory_length) +
                             " differs from the model's t_M " +
                             std::to_string(config_.memory_length));
  }
  const std::size_t n = window.node_count();
  if (config_.variant == ModelVariant::standard) return window.values;
  Tensor features({n, config_.feature_width()});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < expected; ++k) {
      features(i, 2 * k) = window.values(i, k);
      features(i, 2 * k + 1) = window.offsets[k] / config_.memory_length;
    }
  }
  return features;
}

void DeepGraphONet::check_queries(std::span<const double> queries) const {
  if (allow_extrapolation_) return;
  const double tol = 1e-9 * config_.horizon;
  for (double q : queries) {
    if (!(q >= -tol && q <= config_.horizon + tol)) {
      throw DomainError("query " + std::to_string(q) + " s lies outside the horizon [0, " +
                        std::to_string(config_.horizon) + "]");
    }
  }
}

Tensor DeepGraphONet::normalized_queries(std::span<const double> queries) const {
  Tensor t({queries.size(), 1});
  for (std::size_t k = 0; k < queries.size(); ++k) t[k] = queries[k] / config_.horizon;
  return t;
}

template <typename ParamFn>
Var DeepGraphONet::branch_impl(Tape& tape, const Graph& g, Var features, ParamFn&& param) const {
  if (g.node_count() == 0) throw GraphError("branch network needs a non-empty graph");
  if (features.value().cols() != config_.feature_width()) {
    throw DimensionError("branch input width " + std::to_string(features.value().cols()) +
                         " does not match the model's feature width " +
                         std::to_string(config_.feature_width()));
  }
  (void)tape;
  Var h = features;
  for (std::size_t l = 0; l < branch_layers_.size(); ++l) {
    const Layer& layer = branch_layers_[l];
    const bool last = l + 1 == branch_layers_.size();
    h = message_passing(param(layer.w_self), param(layer.w_neigh), param(layer.bias), g, h,
                        last ? Activation::identity : config_.activation);
  }
  return h;
}

template <typename ParamFn>
Var DeepGraphONet::trunk_impl(Tape& tape, std::span<const double> queries,
                              ParamFn&& param) const {
  check_queries(queries);
  Var h = tape.constant(normalized_queries(queries));
  for (const Dense& dense : trunk_layers_) {
    h = activate(affine(param(dense.weight), param(dense.bias), h), config_.activation);
  }
  return h;
}

Var DeepGraphONet::branch(Tape& tape, const Graph& g, Var features) {
  return branch_impl(tape, g, features, [&](ParamId id) { return tape.parameter(params_, id); });
}

Var DeepGraphONet::trunk(Tape& tape, std::span<const double> queries) {
  return trunk_impl(tape, queries, [&](ParamId id) { return tape.parameter(params_, id); });
}

Var DeepGraphONet::forward(Tape& tape, const Graph& g, const Tensor& features,
                           std::span<const double> queries,
                           std::span<const std::size_t> query_window) {
  Var coeffs = branch(tape, g, tape.constant(features));
  Var basis = trunk(tape, queries);
  return merge_nodes(coeffs, basis, query_window, g.node_count());
}

Tensor DeepGraphONet::branch_forward(const Graph& g, const MemoryWindow& window) const {
  if (window.node_count() != g.node_count()) {
    throw DimensionError("window has " + std::to_string(window.node_count()) +
                         " nodes, graph has " + std::to_string(g.node_count()));
  }
  Tape tape;
  auto frozen = [&](ParamId id) { return tape.constant(params_.value(id)); };
  return branch_impl(tape, g, tape.constant(node_features(window)), frozen).value();
}

Tensor DeepGraphONet::trunk_forward(double query) const {
  Tape tape;
  auto frozen = [&](ParamId id) { return tape.constant(params_.value(id)); };
  const double q[] = {query};
  Tensor out = trunk_impl(tape, q, frozen).value();
  return std::move(out).reshaped({config_.latent_dim});
}

Tensor DeepGraphONet::forward(const Graph& g, const MemoryWindow& window, double query) const {
  const double q[] = {query};
  Tensor out = predict(g, window, q);
  return std::move(out).reshaped({g.node_count()});
}

Tensor DeepGraphONet::predict(const Graph& g, const MemoryWindow& window,
                              std::span<const double> queries) const {
  if (window.node_count() != g.node_count()) {
    throw DimensionError("window has " + std::to_string(window.node_count()) +
                         " nodes, graph has " + std::to_string(g.node_count()));
  }
  const std::vector<std::size_t> query_window(queries.size(), 0);
  return predict_batch(g, node_features(window), queries, query_window);
}

Tensor DeepGraphONet::predict_batch(const Graph& g, const Tensor& features,
                                    std::span<const double> queries,
                                    std::span<const std::size_t> query_window) const {
  Tape tape;
  auto frozen = [&](ParamId id) { return tape.constant(params_.value(id)); };
  Var coeffs = branch_impl(tape, g, tape.constant(features), frozen);
  Var basis = trunk_impl(tape, queries, frozen);
  return merge_nodes(coeffs, basis, query_window, g.node_count()).value();
}

Tensor stack_features(const DeepGraphONet& model, std::span<const MemoryWindow* const> windows) {
  const std::size_t f = model.config().feature_width();
  std::size_t rows = 0;
  for (const MemoryWindow* w : windows) rows += w->node_count();
  Tensor out({rows, f});
  std::size_t r = 0;
  for (const MemoryWindow* w : windows) {
    const Tensor feat = model.node_features(*w);
    std::copy(feat.data().begin(), feat.data().end(), out.data().begin() + r * f);
    r += feat.rows();
  }
  return out;
}

}  // namespace dgon
