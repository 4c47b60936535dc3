#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "dgon/params.hpp"
#include "dgon/tensor.hpp"

namespace dgon {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records a forward computation for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so a reverse sweep over the node
/// list is a valid topological order. Gradients of parameter leaves are added
/// into the owning ParamStore's accumulators; the store is never zeroed here.
class Tape {
 public:
  /// Receives the gradient of the node's output and pushes it to parents.
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf bound to a stored parameter; repeated calls return the same node.
  Var parameter(ParamStore& store, ParamId id);
  /// Appends a computed node. `requires_grad` should be true iff any parent requires it.
  Var record(Tensor value, bool requires_grad, BackwardFn backward);

  const Tensor& value(Var v) const { return nodes_.at(v.id()).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id()).requires_grad; }
  /// Gradient buffer of a node, allocated on first use.
  Tensor& grad_buffer(Var v);
  /// Gradient of a node after backward(); zeros if it received none.
  Tensor grad(Var v) const;

  /// Seeds d(out)/d(out) = 1 and propagates. `out` must hold exactly one element.
  void backward(Var out);

  std::size_t node_count() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
    ParamStore* store = nullptr;
    ParamId param;
  };
  std::vector<Node> nodes_;
};

enum class Activation { relu, tanh, identity };

Activation parse_activation(std::string_view name);
std::string_view to_string(Activation kind);

// Differentiable operations. Operands must live on the same tape.

/// x W^T + b. `x` is a vector [p] or a row batch [n x p]; W is [q x p]; b is [q].
Var affine(Var W, Var b, Var x);
/// x W^T without a bias term.
Var linear(Var W, Var x);
Var activate(Var x, Activation kind);
Var add(Var a, Var b);
/// Elementwise product of equally shaped operands.
Var mul(Var a, Var b);
Var scale(Var a, double factor);
/// Sum of all elements, as a rank-1 tensor of length 1.
Var sum(Var a);

/// Per-node dot product of branch coefficients with trunk basis values.
///
/// `coeffs` is [W*n x q] (W windows of n nodes each), `basis` is [Q x q], and
/// query k reads window `query_window[k]`. Returns [Q x n] with
/// out(k, i) = sum_j coeffs(w_k*n + i, j) * basis(k, j).
Var merge_nodes(Var coeffs, Var basis, std::span<const std::size_t> query_window,
                std::size_t nodes_per_window);

/// Mean over samples of the per-sample L1 norm |pred - target|_1.
/// A rank-1 `pred` is one sample; rank 2 is [samples x nodes].
/// The subgradient of |.| at zero is taken as zero.
Var l1_loss(Var pred, const Tensor& target);

/// Non-differentiable forward helpers shared with the tape ops.
Tensor affine(const Tensor& W, const Tensor& b, const Tensor& x);
Tensor activate(const Tensor& x, Activation kind);

}  // namespace dgon
