#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "dgseq/diffcore/tensor.hpp"
#include "dgseq/errors.hpp"

namespace dgseq {

template <typename Scalar>
class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
/// tape that produced it is alive.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Tape<Scalar>* tape, std::size_t id) : tape_(tape), id_(id) {}

  [[nodiscard]] Tape<Scalar>& tape() const { return *tape_; }
  [[nodiscard]] std::size_t id() const { return id_; }
  [[nodiscard]] bool valid() const { return tape_ != nullptr; }

  [[nodiscard]] const Tensor<Scalar>& value() const { return tape_->value(*this); }
  [[nodiscard]] const Tensor<Scalar>& grad() const { return tape_->grad(*this); }
  [[nodiscard]] Eigen::Index rows() const { return value().rows(); }
  [[nodiscard]] Eigen::Index cols() const { return value().cols(); }

 private:
  Tape<Scalar>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Linear record of executed primitives for reverse accumulation.
///
/// Each node holds its forward value, an optional gradient accumulator and a
/// closure that pushes the node's gradient onto its inputs. Nodes that do not
/// depend on any variable carry no closure and are skipped in the reverse sweep.
template <typename Scalar>
class Tape {
 public:
  using Matrix = Tensor<Scalar>;
  using BackwardFn = std::function<void(Tape&, const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Scalar> constant(Matrix value) { return push(std::move(value), false, {}); }

  /// Leaf whose gradient is retained after backward().
  Var<Scalar> variable(Matrix value) {
    auto v = push(std::move(value), true, {});
    nodes_[v.id()].leaf = true;
    return v;
  }

  /// Appends the result of a primitive. The closure is dropped when none of
  /// the parents requires a gradient.
  Var<Scalar> record(Matrix value, std::initializer_list<Var<Scalar>> parents, BackwardFn fn) {
    bool needs = false;
    for (const auto& p : parents) {
      check_owner(p);
      needs = needs || nodes_[p.id()].requires_grad;
    }
    return push(std::move(value), needs, needs ? std::move(fn) : BackwardFn{});
  }

  Var<Scalar> record(Matrix value, const std::vector<Var<Scalar>>& parents, BackwardFn fn) {
    bool needs = false;
    for (const auto& p : parents) {
      check_owner(p);
      needs = needs || nodes_[p.id()].requires_grad;
    }
    return push(std::move(value), needs, needs ? std::move(fn) : BackwardFn{});
  }

  [[nodiscard]] const Matrix& value(Var<Scalar> v) const { return nodes_.at(v.id()).value; }

  /// Gradient of the last backward() target w.r.t. v. Variables always have a
  /// defined gradient after backward(), zero when they did not reach the loss.
  [[nodiscard]] const Matrix& grad(Var<Scalar> v) const {
    const auto& n = nodes_.at(v.id());
    if (!n.has_grad) {
      zero_cache_ = Matrix::Zero(n.value.rows(), n.value.cols());
      return zero_cache_;
    }
    return n.grad;
  }

  [[nodiscard]] bool requires_grad(Var<Scalar> v) const { return nodes_.at(v.id()).requires_grad; }
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }

  template <typename Expr>
  void accumulate(Var<Scalar> target, const Expr& g) {
    auto& n = nodes_[target.id()];
    if (!n.requires_grad) return;
    if (!n.has_grad) {
      n.grad = g;
      n.has_grad = true;
    } else {
      n.grad += g;
    }
  }

  /// Reverse sweep from a 1x1 loss. `visit` (optional) observes the id of
  /// every node whose closure runs, in visiting order.
  void backward(Var<Scalar> loss, const std::function<void(std::size_t)>& visit = {}) {
    check_owner(loss);
    const auto& out = nodes_[loss.id()].value;
    if (out.rows() != 1 || out.cols() != 1) {
      throw ContractError("backward: loss must be a scalar, got " + shape_string(out));
    }
    for (auto& n : nodes_) {
      n.has_grad = false;
      if (n.leaf) {
        n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
        n.has_grad = true;
      }
    }
    accumulate(loss, Matrix::Ones(1, 1));
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (!n.backward || !n.has_grad) continue;
      if (visit) visit(i);
      n.backward(*this, n.grad);
    }
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    bool requires_grad = false;
    bool has_grad = false;
    bool leaf = false;
  };

  Var<Scalar> push(Matrix value, bool requires_grad, BackwardFn fn) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return Var<Scalar>(this, nodes_.size() - 1);
  }

  void check_owner(Var<Scalar> v) const {
    if (!v.valid() || &v.tape() != this || v.id() >= nodes_.size()) {
      throw ContractError("tape: variable does not belong to this tape");
    }
  }

  std::vector<Node> nodes_;
  mutable Matrix zero_cache_;
};

}  // namespace dgseq
