#include "dgon/autodiff.hpp"

#include <Eigen/Core>
#include <cmath>
#include <string>

#include "dgon/errors.hpp"

namespace dgon {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using ConstRowVectorMap = Eigen::Map<const Eigen::RowVectorXd>;
using RowVectorMap = Eigen::Map<Eigen::RowVectorXd>;

ConstMatrixMap as_matrix(const Tensor& t) {
  return ConstMatrixMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                        static_cast<Eigen::Index>(t.cols()));
}

MatrixMap as_matrix(Tensor& t) {
  return MatrixMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                   static_cast<Eigen::Index>(t.cols()));
}

Tape& common_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw ContractError("operands recorded on different tapes");
  return a.tape();
}

void check_affine_shapes(const Tensor& W, const Tensor& b, const Tensor& x) {
  const bool ok = W.rank() == 2 && b.rank() == 1 && (x.rank() == 1 || x.rank() == 2) &&
                  b.size() == W.rows() && x.cols() == W.cols();
  if (!ok) {
    throw DimensionError("affine: W " + W.shape_string() + ", b " + b.shape_string() +
                         " and x " + x.shape_string() + " do not conform");
  }
}

double activation_value(double x, Activation kind) {
  switch (kind) {
    case Activation::relu:
      return x > 0.0 ? x : 0.0;
    case Activation::tanh:
      return std::tanh(x);
    case Activation::identity:
      return x;
  }
  return x;
}

// Derivative expressed through the activation output y.
double activation_slope(double y, Activation kind) {
  switch (kind) {
    case Activation::relu:
      return y > 0.0 ? 1.0 : 0.0;
    case Activation::tanh:
      return 1.0 - y * y;
    case Activation::identity:
      return 1.0;
  }
  return 1.0;
}

}  // namespace

const Tensor& Var::value() const { return tape_->value(*this); }

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(ParamStore& store, ParamId id) {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].store == &store && nodes_[i].param == id) return Var(this, i);
  }
  Node n;
  n.value = store.value(id);
  n.requires_grad = true;
  n.store = &store;
  n.param = id;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, bool requires_grad, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad_buffer(Var v) {
  Node& n = nodes_.at(v.id());
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor::zeros_like(n.value);
  return n.grad;
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id());
  return n.grad.empty() ? Tensor::zeros_like(n.value) : n.grad;
}

void Tape::backward(Var out) {
  if (&out.tape() != this) throw ContractError("backward: output belongs to another tape");
  if (value(out).size() != 1) {
    throw ContractError("backward requires a scalar output, got shape " +
                        value(out).shape_string());
  }
  for (auto& n : nodes_) n.grad = Tensor();
  grad_buffer(out)[0] = 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, n.grad);
    if (n.store != nullptr) {
      auto acc = n.store->grad(n.param).data();
      auto g = n.grad.data();
      for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += g[k];
    }
  }
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Activation kind) {
  switch (kind) {
    case Activation::relu:
      return "relu";
    case Activation::tanh:
      return "tanh";
    case Activation::identity:
      return "identity";
  }
  return "identity";
}

Tensor affine(const Tensor& W, const Tensor& b, const Tensor& x) {
  check_affine_shapes(W, b, x);
  Tensor y = x.rank() == 1 ? Tensor({W.rows()}) : Tensor({x.rows(), W.rows()});
  auto Y = as_matrix(y);
  Y.noalias() = as_matrix(x) * as_matrix(W).transpose();
  Y.rowwise() += ConstRowVectorMap(b.data().data(), static_cast<Eigen::Index>(b.size()));
  return y;
}

Tensor activate(const Tensor& x, Activation kind) {
  Tensor y = x;
  for (double& v : y.data()) v = activation_value(v, kind);
  return y;
}

Var affine(Var W, Var b, Var x) {
  Tape& tape = common_tape(W, x);
  common_tape(W, b);
  Tensor y = affine(W.value(), b.value(), x.value());
  const bool rg = tape.requires_grad(W) || tape.requires_grad(b) || tape.requires_grad(x);
  return tape.record(std::move(y), rg, [W, b, x](Tape& t, const Tensor& gy) {
    const auto dY = as_matrix(gy);
    if (t.requires_grad(W)) {
      as_matrix(t.grad_buffer(W)).noalias() += dY.transpose() * as_matrix(t.value(x));
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad_buffer(b);
      RowVectorMap(gb.data().data(), static_cast<Eigen::Index>(gb.size())) +=
          dY.colwise().sum();
    }
    if (t.requires_grad(x)) {
      as_matrix(t.grad_buffer(x)).noalias() += dY * as_matrix(t.value(W));
    }
  });
}

Var linear(Var W, Var x) {
  Tape& tape = common_tape(W, x);
  const Tensor& Wv = W.value();
  const Tensor& xv = x.value();
  if (Wv.rank() != 2 || xv.cols() != Wv.cols() || xv.rank() == 0 || xv.rank() > 2) {
    throw DimensionError("linear: W " + Wv.shape_string() + " and x " + xv.shape_string() +
                         " do not conform");
  }
  Tensor y = xv.rank() == 1 ? Tensor({Wv.rows()}) : Tensor({xv.rows(), Wv.rows()});
  as_matrix(y).noalias() = as_matrix(xv) * as_matrix(Wv).transpose();
  const bool rg = tape.requires_grad(W) || tape.requires_grad(x);
  return tape.record(std::move(y), rg, [W, x](Tape& t, const Tensor& gy) {
    const auto dY = as_matrix(gy);
    if (t.requires_grad(W)) {
      as_matrix(t.grad_buffer(W)).noalias() += dY.transpose() * as_matrix(t.value(x));
    }
    if (t.requires_grad(x)) {
      as_matrix(t.grad_buffer(x)).noalias() += dY * as_matrix(t.value(W));
    }
  });
}

Var activate(Var x, Activation kind) {
  Tape& tape = x.tape();
  if (kind == Activation::identity) return x;
  Tensor y = activate(x.value(), kind);
  const std::size_t self = tape.node_count();
  return tape.record(std::move(y), tape.requires_grad(x),
                     [x, kind, self](Tape& t, const Tensor& gy) {
                       const auto out = t.value(Var(&t, self)).data();
                       auto gx = t.grad_buffer(x).data();
                       const auto g = gy.data();
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         gx[i] += g[i] * activation_slope(out[i], kind);
                       }
                     });
}

Var add(Var a, Var b) {
  Tape& tape = common_tape(a, b);
  if (!a.value().same_shape(b.value())) {
    throw DimensionError("add: shapes " + a.value().shape_string() + " and " +
                         b.value().shape_string() + " differ");
  }
  Tensor y = a.value();
  const auto bv = b.value().data();
  auto yv = y.data();
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] += bv[i];
  const bool rg = tape.requires_grad(a) || tape.requires_grad(b);
  return tape.record(std::move(y), rg, [a, b](Tape& t, const Tensor& gy) {
    for (Var v : {a, b}) {
      if (!t.requires_grad(v)) continue;
      auto g = t.grad_buffer(v).data();
      const auto src = gy.data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += src[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& tape = common_tape(a, b);
  if (!a.value().same_shape(b.value())) {
    throw DimensionError("mul: shapes " + a.value().shape_string() + " and " +
                         b.value().shape_string() + " differ");
  }
  Tensor y = a.value();
  const auto bv = b.value().data();
  auto yv = y.data();
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] *= bv[i];
  const bool rg = tape.requires_grad(a) || tape.requires_grad(b);
  return tape.record(std::move(y), rg, [a, b](Tape& t, const Tensor& gy) {
    const auto g = gy.data();
    if (t.requires_grad(a)) {
      auto ga = t.grad_buffer(a).data();
      const auto bv = t.value(b).data();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(b)) {
      auto gb = t.grad_buffer(b).data();
      const auto av = t.value(a).data();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tape& tape = a.tape();
  Tensor y = a.value();
  for (double& v : y.data()) v *= factor;
  return tape.record(std::move(y), tape.requires_grad(a), [a, factor](Tape& t, const Tensor& gy) {
    auto ga = t.grad_buffer(a).data();
    const auto g = gy.data();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
  });
}

Var sum(Var a) {
  Tape& tape = a.tape();
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  return tape.record(Tensor::vector({total}), tape.requires_grad(a),
                     [a](Tape& t, const Tensor& gy) {
                       const double g = gy[0];
                       for (double& v : t.grad_buffer(a).data()) v += g;
                     });
}

Var merge_nodes(Var coeffs, Var basis, std::span<const std::size_t> query_window,
                std::size_t nodes_per_window) {
  Tape& tape = common_tape(coeffs, basis);
  const Tensor& B = coeffs.value();
  const Tensor& P = basis.value();
  const std::size_t n = nodes_per_window;
  if (B.rank() != 2 || P.rank() != 2 || B.cols() != P.cols()) {
    throw DimensionError("merge: coefficient shape " + B.shape_string() +
                         " and basis shape " + P.shape_string() + " do not conform");
  }
  if (n == 0 || B.rows() % n != 0 || query_window.size() != P.rows()) {
    throw DimensionError("merge: inconsistent window layout");
  }
  const std::size_t n_windows = B.rows() / n;
  const std::size_t q = B.cols();
  Tensor y({P.rows(), n});
  for (std::size_t k = 0; k < P.rows(); ++k) {
    if (query_window[k] >= n_windows) throw DimensionError("merge: window index out of range");
    const double* phi = P.row(k).data();
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = B.row(query_window[k] * n + i).data();
      double acc = 0.0;
      for (std::size_t j = 0; j < q; ++j) acc += row[j] * phi[j];
      y(k, i) = acc;
    }
  }
  std::vector<std::size_t> windows(query_window.begin(), query_window.end());
  const bool rg = tape.requires_grad(coeffs) || tape.requires_grad(basis);
  return tape.record(std::move(y), rg,
                     [coeffs, basis, windows = std::move(windows), n, q](Tape& t,
                                                                         const Tensor& gy) {
                       const Tensor& Bv = t.value(coeffs);
                       const Tensor& Pv = t.value(basis);
                       const bool gc = t.requires_grad(coeffs);
                       const bool gp = t.requires_grad(basis);
                       Tensor* gB = gc ? &t.grad_buffer(coeffs) : nullptr;
                       Tensor* gP = gp ? &t.grad_buffer(basis) : nullptr;
                       for (std::size_t k = 0; k < windows.size(); ++k) {
                         for (std::size_t i = 0; i < n; ++i) {
                           const double g = gy(k, i);
                           if (g == 0.0) continue;
                           const std::size_t r = windows[k] * n + i;
                           for (std::size_t j = 0; j < q; ++j) {
                             if (gc) (*gB)(r, j) += g * Pv(k, j);
                             if (gp) (*gP)(k, j) += g * Bv(r, j);
                           }
                         }
                       }
                     });
}

Var l1_loss(Var pred, const Tensor& target) {
  Tape& tape = pred.tape();
  const Tensor& p = pred.value();
  if (!p.same_shape(target)) {
    throw DimensionError("l1_loss: prediction " + p.shape_string() + " vs target " +
                         target.shape_string());
  }
  const std::size_t samples = p.rank() == 2 ? p.rows() : 1;
  if (samples == 0) throw DimensionError("l1_loss: empty batch");
  double total = 0.0;
  const auto pv = p.data();
  const auto tv = target.data();
  for (std::size_t i = 0; i < pv.size(); ++i) total += std::abs(pv[i] - tv[i]);
  const double inv = 1.0 / static_cast<double>(samples);
  return tape.record(Tensor::vector({total * inv}), tape.requires_grad(pred),
                     [pred, target, inv](Tape& t, const Tensor& gy) {
                       const double g = gy[0] * inv;
                       const auto pv = t.value(pred).data();
                       const auto tv = target.data();
                       auto gp = t.grad_buffer(pred).data();
                       for (std::size_t i = 0; i < pv.size(); ++i) {
                         const double d = pv[i] - tv[i];
                         if (d > 0.0) gp[i] += g;
                         else if (d < 0.0) gp[i] -= g;
                       }
                     });
}

}  // namespace dgon
