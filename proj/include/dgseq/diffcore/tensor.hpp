#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <sstream>
#include <string>

namespace dgseq {

/// Dense row-major storage used for every real-valued quantity in the model.
/// Vectors are 1 x n rows; the shape of a tensor is {rows, cols}.
template <typename Scalar>
using Tensor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using TensorD = Tensor<double>;

template <typename Derived>
std::string shape_string(const Eigen::DenseBase<Derived>& m) {
  std::ostringstream os;
  os << '[' << m.rows() << 'x' << m.cols() << ']';
  return os.str();
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.derived().array().isFinite().all();
}

}  // namespace dgseq
