#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dgseq/diffcore/tape.hpp"

// Differentiable primitives. Each op computes its forward value with Eigen and
// registers the matching vector-Jacobian product on the tape.

namespace dgseq {

namespace detail {

template <typename Scalar>
void require_same_tape(const Var<Scalar>& a, const Var<Scalar>& b) {
  if (&a.tape() != &b.tape()) throw ContractError("ops: operands recorded on different tapes");
}

template <typename Scalar>
void require_same_shape(const char* op, const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.value()) + " vs " +
                         shape_string(b.value()));
  }
}

template <typename Scalar>
void require_vector(const char* op, const Var<Scalar>& x) {
  if (x.rows() != 1 && x.cols() != 1) {
    throw DimensionError(std::string(op) + ": expected a vector, got " + shape_string(x.value()));
  }
}

}  // namespace detail

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_tape(a, b);
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions disagree " + shape_string(a.value()) + " x " +
                         shape_string(b.value()));
  }
  Tensor<Scalar> out = a.value() * b.value();
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * t.value(b).transpose());
    if (t.requires_grad(b)) t.accumulate(b, t.value(a).transpose() * g);
  });
}

template <typename Scalar>
Var<Scalar> transpose(const Var<Scalar>& a) {
  Tensor<Scalar> out = a.value().transpose();
  return a.tape().record(std::move(out), {a}, [a](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    t.accumulate(a, g.transpose());
  });
}

template <typename Scalar>
Var<Scalar> operator+(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape("add", a, b);
  Tensor<Scalar> out = a.value() + b.value();
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

template <typename Scalar>
Var<Scalar> operator-(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape("sub", a, b);
  Tensor<Scalar> out = a.value() - b.value();
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

/// a + 1 * row: adds a 1 x c row to every row of a.
template <typename Scalar>
Var<Scalar> add_row(const Var<Scalar>& a, const Var<Scalar>& row) {
  detail::require_same_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError("add_row: " + shape_string(row.value()) + " cannot broadcast over " +
                         shape_string(a.value()));
  }
  Tensor<Scalar> out = a.value().rowwise() + row.value().row(0);
  return a.tape().record(std::move(out), {a, row},
                         [a, row](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                           t.accumulate(a, g);
                           if (t.requires_grad(row)) t.accumulate(row, g.colwise().sum());
                         });
}

/// x W + b with b broadcast over rows.
template <typename Scalar>
Var<Scalar> affine(const Var<Scalar>& x, const Var<Scalar>& w, const Var<Scalar>& b) {
  detail::require_same_tape(x, w);
  detail::require_same_tape(x, b);
  if (x.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols()) {
    throw DimensionError("affine: incompatible shapes x" + shape_string(x.value()) + " W" +
                         shape_string(w.value()) + " b" + shape_string(b.value()));
  }
  Tensor<Scalar> out = x.value() * w.value();
  out.rowwise() += b.value().row(0);
  return x.tape().record(std::move(out), {x, w, b},
                         [x, w, b](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                           if (t.requires_grad(x)) t.accumulate(x, g * t.value(w).transpose());
                           if (t.requires_grad(w)) t.accumulate(w, t.value(x).transpose() * g);
                           if (t.requires_grad(b)) t.accumulate(b, g.colwise().sum());
                         });
}

template <typename Scalar>
Var<Scalar> hadamard(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape("hadamard", a, b);
  Tensor<Scalar> out = a.value().cwiseProduct(b.value());
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    if (t.requires_grad(a)) t.accumulate(a, g.cwiseProduct(t.value(b)));
    if (t.requires_grad(b)) t.accumulate(b, g.cwiseProduct(t.value(a)));
  });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar s) {
  Tensor<Scalar> out = a.value() * s;
  return a.tape().record(std::move(out), {a}, [a, s](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    t.accumulate(a, g * s);
  });
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& a) {
  Tensor<Scalar> out = a.value().cwiseMax(Scalar(0));
  return a.tape().record(std::move(out), {a}, [a](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    t.accumulate(a, (t.value(a).array() > Scalar(0)).select(g, Scalar(0)));
  });
}

template <typename Scalar>
Var<Scalar> tanh(const Var<Scalar>& a) {
  Tensor<Scalar> out = a.value().array().tanh().matrix();
  const std::size_t self = a.tape().size();
  return a.tape().record(std::move(out), {a}, [a, self](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    const auto& y = t.value(Var<Scalar>(&t, self));
    t.accumulate(a, (g.array() * (Scalar(1) - y.array().square())).matrix());
  });
}

template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& a) {
  Tensor<Scalar> out = (Scalar(1) / (Scalar(1) + (-a.value().array()).exp())).matrix();
  const std::size_t self = a.tape().size();
  return a.tape().record(std::move(out), {a}, [a, self](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    const auto& y = t.value(Var<Scalar>(&t, self));
    t.accumulate(a, (g.array() * y.array() * (Scalar(1) - y.array())).matrix());
  });
}

/// Numerically stable softmax over a row or column vector.
template <typename Scalar>
Tensor<Scalar> softmax_values(const Tensor<Scalar>& x) {
  if (x.size() == 0) throw DomainError("softmax: empty input");
  const Scalar shift = x.maxCoeff();
  Tensor<Scalar> e = (x.array() - shift).exp().matrix();
  return e / e.sum();
}

template <typename Scalar>
Var<Scalar> softmax(const Var<Scalar>& x) {
  if (x.value().size() == 0) throw DomainError("softmax: empty input");
  detail::require_vector("softmax", x);
  Tensor<Scalar> out = softmax_values(x.value());
  const std::size_t self = x.tape().size();
  return x.tape().record(std::move(out), {x}, [x, self](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    const auto& y = t.value(Var<Scalar>(&t, self));
    const Scalar dot = g.cwiseProduct(y).sum();
    t.accumulate(x, (y.array() * (g.array() - dot)).matrix());
  });
}

/// Column-wise maximum over rows: N x c -> 1 x c. Ties go to the lowest row.
template <typename Scalar>
Var<Scalar> max_rows(const Var<Scalar>& x) {
  if (x.rows() == 0) throw DomainError("max_rows: no rows");
  const auto& v = x.value();
  Tensor<Scalar> out(1, v.cols());
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(v.cols()), 0);
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < v.rows(); ++i) {
      if (v(i, j) > v(best, j)) best = i;
    }
    arg[static_cast<std::size_t>(j)] = best;
    out(0, j) = v(best, j);
  }
  const Eigen::Index rows = v.rows();
  return x.tape().record(std::move(out), {x},
                         [x, arg = std::move(arg), rows](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                           Tensor<Scalar> dx = Tensor<Scalar>::Zero(rows, g.cols());
                           for (Eigen::Index j = 0; j < g.cols(); ++j) {
                             dx(arg[static_cast<std::size_t>(j)], j) = g(0, j);
                           }
                           t.accumulate(x, dx);
                         });
}

template <typename Scalar>
Var<Scalar> concat_cols(const std::vector<Var<Scalar>>& parts) {
  if (parts.empty()) throw DomainError("concat_cols: no inputs");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    detail::require_same_tape(parts.front(), p);
    if (p.rows() != rows) throw DimensionError("concat_cols: row counts differ");
    cols += p.cols();
  }
  Tensor<Scalar> out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return parts.front().tape().record(std::move(out), parts,
                                     [parts](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                                       Eigen::Index off = 0;
                                       for (const auto& p : parts) {
                                         const Eigen::Index c = t.value(p).cols();
                                         if (t.requires_grad(p)) t.accumulate(p, g.middleCols(off, c));
                                         off += c;
                                       }
                                     });
}

template <typename Scalar>
Var<Scalar> concat_rows(const std::vector<Var<Scalar>>& parts) {
  if (parts.empty()) throw DomainError("concat_rows: no inputs");
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    detail::require_same_tape(parts.front(), p);
    if (p.cols() != cols) throw DimensionError("concat_rows: column counts differ");
    rows += p.rows();
  }
  Tensor<Scalar> out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return parts.front().tape().record(std::move(out), parts,
                                     [parts](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                                       Eigen::Index off = 0;
                                       for (const auto& p : parts) {
                                         const Eigen::Index r = t.value(p).rows();
                                         if (t.requires_grad(p)) t.accumulate(p, g.middleRows(off, r));
                                         off += r;
                                       }
                                     });
}

template <typename Scalar>
Var<Scalar> slice_rows(const Var<Scalar>& x, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 1 || start + count > x.rows()) {
    throw DimensionError("slice_rows: range out of bounds for " + shape_string(x.value()));
  }
  Tensor<Scalar> out = x.value().middleRows(start, count);
  return x.tape().record(std::move(out), {x},
                         [x, start, count](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                           Tensor<Scalar> dx = Tensor<Scalar>::Zero(t.value(x).rows(), t.value(x).cols());
                           dx.middleRows(start, count) = g;
                           t.accumulate(x, dx);
                         });
}

template <typename Scalar>
Var<Scalar> slice_cols(const Var<Scalar>& x, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 1 || start + count > x.cols()) {
    throw DimensionError("slice_cols: range out of bounds for " + shape_string(x.value()));
  }
  Tensor<Scalar> out = x.value().middleCols(start, count);
  return x.tape().record(std::move(out), {x},
                         [x, start, count](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                           Tensor<Scalar> dx = Tensor<Scalar>::Zero(t.value(x).rows(), t.value(x).cols());
                           dx.middleCols(start, count) = g;
                           t.accumulate(x, dx);
                         });
}

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& x) {
  Tensor<Scalar> out(1, 1);
  out(0, 0) = x.value().sum();
  return x.tape().record(std::move(out), {x}, [x](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    t.accumulate(x, Tensor<Scalar>::Constant(t.value(x).rows(), t.value(x).cols(), g(0, 0)));
  });
}

/// -log softmax(logits)[target] for a 1 x V row of logits.
template <typename Scalar>
Var<Scalar> cross_entropy(const Var<Scalar>& logits, Eigen::Index target) {
  if (logits.rows() != 1) throw DimensionError("cross_entropy: logits must be a single row");
  if (target < 0 || target >= logits.cols()) {
    throw DomainError("cross_entropy: target " + std::to_string(target) + " outside vocabulary of " +
                      std::to_string(logits.cols()));
  }
  const auto& z = logits.value();
  const Scalar shift = z.maxCoeff();
  const Scalar lse = shift + std::log((z.array() - shift).exp().sum());
  Tensor<Scalar> out(1, 1);
  out(0, 0) = lse - z(0, target);
  return logits.tape().record(std::move(out), {logits},
                              [logits, target, lse](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                                Tensor<Scalar> p = (t.value(logits).array() - lse).exp().matrix();
                                p(0, target) -= Scalar(1);
                                t.accumulate(logits, p * g(0, 0));
                              });
}

/// Weights of a standard LSTM layer. Gate blocks along the 4H axis are ordered
/// input, forget, candidate, output.
template <typename Scalar>
struct LstmWeights {
  Var<Scalar> input;      // d_in x 4H
  Var<Scalar> recurrent;  // H x 4H
  Var<Scalar> bias;       // 1 x 4H
};

template <typename Scalar>
struct LstmState {
  Var<Scalar> hidden;  // 1 x H
  Var<Scalar> cell;    // 1 x H
};

/// One LSTM step, recorded as a single fused node holding [h | c].
template <typename Scalar>
LstmState<Scalar> lstm_cell(const Var<Scalar>& x, const LstmState<Scalar>& prev,
                            const LstmWeights<Scalar>& w) {
  const Eigen::Index hsize = prev.hidden.cols();
  const Eigen::Index gates = 4 * hsize;
  if (x.rows() != 1 || prev.hidden.rows() != 1 || prev.cell.rows() != 1 ||
      prev.cell.cols() != hsize || w.input.rows() != x.cols() || w.input.cols() != gates ||
      w.recurrent.rows() != hsize || w.recurrent.cols() != gates || w.bias.rows() != 1 ||
      w.bias.cols() != gates) {
    throw DimensionError("lstm_cell: x" + shape_string(x.value()) + " h" +
                         shape_string(prev.hidden.value()) + " c" + shape_string(prev.cell.value()) +
                         " Wx" + shape_string(w.input.value()) + " Wh" +
                         shape_string(w.recurrent.value()) + " b" + shape_string(w.bias.value()));
  }
  using Row = Tensor<Scalar>;
  Row z = x.value() * w.input.value() + prev.hidden.value() * w.recurrent.value() + w.bias.value();
  auto logistic = [](const auto& v) -> Row {
    return (Scalar(1) / (Scalar(1) + (-v.array()).exp())).matrix();
  };
  Row i = logistic(z.middleCols(0, hsize));
  Row f = logistic(z.middleCols(hsize, hsize));
  Row gc = z.middleCols(2 * hsize, hsize).array().tanh().matrix();
  Row o = logistic(z.middleCols(3 * hsize, hsize));
  Row c = f.cwiseProduct(prev.cell.value()) + i.cwiseProduct(gc);
  Row tc = c.array().tanh().matrix();
  Row h = o.cwiseProduct(tc);

  Row hc(1, 2 * hsize);
  hc << h, c;
  auto& tape = x.tape();
  const Var<Scalar> hprev = prev.hidden;
  const Var<Scalar> cprev = prev.cell;
  const LstmWeights<Scalar> weights = w;
  auto fused = tape.record(
      std::move(hc), {x, hprev, cprev, w.input, w.recurrent, w.bias},
      [=](Tape<Scalar>& t, const Tensor<Scalar>& g) {
        const auto dh = g.middleCols(0, hsize).array();
        Row dc = (g.middleCols(hsize, hsize).array() + dh * o.array() * (Scalar(1) - tc.array().square()))
                     .matrix();
        Row dz(1, gates);
        dz.middleCols(0, hsize) = (dc.array() * gc.array() * i.array() * (Scalar(1) - i.array())).matrix();
        dz.middleCols(hsize, hsize) =
            (dc.array() * t.value(cprev).array() * f.array() * (Scalar(1) - f.array())).matrix();
        dz.middleCols(2 * hsize, hsize) = (dc.array() * i.array() * (Scalar(1) - gc.array().square())).matrix();
        dz.middleCols(3 * hsize, hsize) = (dh * tc.array() * o.array() * (Scalar(1) - o.array())).matrix();
        if (t.requires_grad(x)) t.accumulate(x, dz * t.value(weights.input).transpose());
        if (t.requires_grad(hprev)) t.accumulate(hprev, dz * t.value(weights.recurrent).transpose());
        if (t.requires_grad(cprev)) t.accumulate(cprev, dc.cwiseProduct(f));
        if (t.requires_grad(weights.input)) t.accumulate(weights.input, t.value(x).transpose() * dz);
        if (t.requires_grad(weights.recurrent)) {
          t.accumulate(weights.recurrent, t.value(hprev).transpose() * dz);
        }
        if (t.requires_grad(weights.bias)) t.accumulate(weights.bias, dz);
      });
  return {slice_cols(fused, 0, hsize), slice_cols(fused, hsize, hsize)};
}

}  // namespace dgseq
