#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "dgseq/diffcore/tape.hpp"

namespace dgseq {

/// Named learnable tensors with their gradient accumulators and Adam moments.
/// Slots are kept in name order so every traversal is deterministic.
template <typename Scalar>
class ParamStore {
 public:
  using Matrix = Tensor<Scalar>;

  struct Slot {
    Matrix value;
    Matrix grad;
    Matrix m;
    Matrix v;
  };

  void add(const std::string& name, Matrix init) {
    if (frozen_) throw ContractError("ParamStore: cannot add '" + name + "' after freeze()");
    if (slots_.count(name) != 0) throw ContractError("ParamStore: duplicate parameter '" + name + "'");
    const auto r = init.rows();
    const auto c = init.cols();
    slots_.emplace(name, Slot{std::move(init), Matrix::Zero(r, c), Matrix::Zero(r, c), Matrix::Zero(r, c)});
  }

  /// Fixes the name set.
  void freeze() { frozen_ = true; }
  [[nodiscard]] bool frozen() const { return frozen_; }

  [[nodiscard]] bool contains(const std::string& name) const { return slots_.count(name) != 0; }

  [[nodiscard]] Slot& slot(const std::string& name) {
    auto it = slots_.find(name);
    if (it == slots_.end()) throw ContractError("ParamStore: unknown parameter '" + name + "'");
    return it->second;
  }
  [[nodiscard]] const Slot& slot(const std::string& name) const {
    auto it = slots_.find(name);
    if (it == slots_.end()) throw ContractError("ParamStore: unknown parameter '" + name + "'");
    return it->second;
  }

  [[nodiscard]] Matrix& value(const std::string& name) { return slot(name).value; }
  [[nodiscard]] const Matrix& value(const std::string& name) const { return slot(name).value; }
  [[nodiscard]] const Matrix& grad(const std::string& name) const { return slot(name).grad; }

  [[nodiscard]] std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(slots_.size());
    for (const auto& [name, _] : slots_) out.push_back(name);
    return out;
  }

  [[nodiscard]] std::map<std::string, Slot>& slots() { return slots_; }
  [[nodiscard]] const std::map<std::string, Slot>& slots() const { return slots_; }

  [[nodiscard]] std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t s) { step_ = s; }

  [[nodiscard]] std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [_, s] : slots_) n += static_cast<std::size_t>(s.value.size());
    return n;
  }

  void zero_grad() {
    for (auto& [_, s] : slots_) s.grad.setZero();
  }

  [[nodiscard]] Scalar grad_norm() const {
    Scalar sq = 0;
    for (const auto& [_, s] : slots_) sq += s.grad.squaredNorm();
    return std::sqrt(sq);
  }

  /// Rescales all gradients so that their global L2 norm is at most max_norm.
  void clip_grad_norm(Scalar max_norm) {
    const Scalar norm = grad_norm();
    if (norm > max_norm && norm > 0) {
      const Scalar factor = max_norm / norm;
      for (auto& [_, s] : slots_) s.grad *= factor;
    }
  }

 private:
  std::map<std::string, Slot> slots_;
  std::uint64_t step_ = 0;
  bool frozen_ = false;
};

/// Glorot-uniform matrix: U[-r, r] with r = sqrt(6 / (rows + cols)).
template <typename Scalar, typename Rng>
Tensor<Scalar> glorot_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const Scalar r = std::sqrt(Scalar(6) / static_cast<Scalar>(rows + cols));
  std::uniform_real_distribution<Scalar> dist(-r, r);
  Tensor<Scalar> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

/// Binds ParamStore slots to leaves of one tape. Each slot becomes a single
/// leaf on first use, so repeated uses accumulate into one gradient.
template <typename Scalar>
class ParamBinding {
 public:
  ParamBinding(Tape<Scalar>& tape, const ParamStore<Scalar>& store, bool trainable = true)
      : tape_(tape), store_(store), trainable_(trainable) {}

  Var<Scalar> operator()(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    const auto& value = store_.value(name);
    auto v = trainable_ ? tape_.variable(value) : tape_.constant(value);
    bound_.emplace(name, v);
    return v;
  }

  [[nodiscard]] Tape<Scalar>& tape() const { return tape_; }

  /// Adds this tape's leaf gradients into the store's accumulators.
  void accumulate_into(ParamStore<Scalar>& store) const {
    for (const auto& [name, v] : bound_) store.slot(name).grad += tape_.grad(v);
  }

 private:
  Tape<Scalar>& tape_;
  const ParamStore<Scalar>& store_;
  bool trainable_;
  std::map<std::string, Var<Scalar>> bound_;
};

}  // namespace dgseq
