#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dgseq/diffcore/param_store.hpp"

namespace dgseq {

struct SlotCheck {
  std::string name;
  double max_rel_error = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<SlotCheck> slots;
  [[nodiscard]] bool passed() const {
    return std::all_of(slots.begin(), slots.end(), [](const SlotCheck& s) { return s.passed; });
  }
  [[nodiscard]] double worst() const {
    double w = 0.0;
    for (const auto& s : slots) w = std::max(w, s.max_rel_error);
    return w;
  }
};

/// Builds a scalar loss on the given tape from parameters looked up by name.
template <typename Scalar>
using TapedLoss = std::function<Var<Scalar>(ParamBinding<Scalar>&)>;

/// Relative error with a unit floor: |a - n| / max(1, |a|, |n|).
inline double gradient_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

/// Compares reverse-mode gradients with central differences, slot by slot.
template <typename Scalar>
GradCheckReport grad_check(const TapedLoss<Scalar>& f, ParamStore<Scalar>& store, Scalar h, double tol) {
  if (!(h > 0)) throw DomainError("grad_check: step must be positive");
  auto eval = [&]() -> Scalar {
    Tape<Scalar> tape;
    ParamBinding<Scalar> bind(tape, store, false);
    const Scalar v = f(bind).value()(0, 0);
    if (!std::isfinite(static_cast<double>(v))) throw NumericError("grad_check: loss is not finite");
    return v;
  };

  store.zero_grad();
  {
    Tape<Scalar> tape;
    ParamBinding<Scalar> bind(tape, store, true);
    auto loss = f(bind);
    if (!std::isfinite(static_cast<double>(loss.value()(0, 0)))) {
      throw NumericError("grad_check: loss is not finite");
    }
    tape.backward(loss);
    bind.accumulate_into(store);
  }

  GradCheckReport report;
  for (auto& [name, slot] : store.slots()) {
    SlotCheck check{name, 0.0, true};
    for (Eigen::Index i = 0; i < slot.value.size(); ++i) {
      Scalar& x = slot.value.data()[i];
      const Scalar saved = x;
      x = saved + h;
      const Scalar up = eval();
      x = saved - h;
      const Scalar down = eval();
      x = saved;
      const double numeric = static_cast<double>((up - down) / (Scalar(2) * h));
      const double err = gradient_error(static_cast<double>(slot.grad.data()[i]), numeric);
      check.max_rel_error = std::max(check.max_rel_error, err);
    }
    check.passed = check.max_rel_error <= tol;
    report.slots.push_back(check);
  }
  store.zero_grad();
  return report;
}

}  // namespace dgseq
