#pragma once

#include <cmath>

#include "dgseq/diffcore/param_store.hpp"

namespace dgseq {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam update over every slot, then zeroes the gradients.
/// Gradients are validated before any slot is touched.
template <typename Scalar>
void adam_step(ParamStore<Scalar>& store, const AdamOptions& opt) {
  for (const auto& [name, s] : store.slots()) {
    if (!all_finite(s.grad)) throw NumericError("adam_step: non-finite gradient in slot '" + name + "'");
  }
  const auto step = store.step() + 1;
  const Scalar b1 = static_cast<Scalar>(opt.beta1);
  const Scalar b2 = static_cast<Scalar>(opt.beta2);
  const Scalar correction1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(step));
  const Scalar correction2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(step));
  const Scalar lr = static_cast<Scalar>(opt.learning_rate);
  const Scalar eps = static_cast<Scalar>(opt.epsilon);
  for (auto& [_, s] : store.slots()) {
    s.m = b1 * s.m + (Scalar(1) - b1) * s.grad;
    s.v = b2 * s.v + (Scalar(1) - b2) * s.grad.cwiseProduct(s.grad);
    auto m_hat = s.m.array() / correction1;
    auto v_hat = s.v.array() / correction2;
    s.value.array() -= lr * m_hat / (v_hat.sqrt() + eps);
    s.grad.setZero();
  }
  store.set_step(step);
}

}  // namespace dgseq
