#pragma once

#include <functional>
#include <string>
#include <utility>

#include "varpro/linear_operator.hpp"

namespace varpro {

/// A separable model y -> A(y) with m x n operators and r nonlinear parameters.
template <typename Scalar>
struct SeparableModel {
  using Vector = VectorX<Scalar>;
  using Builder = std::function<LinearOperator<Scalar>(const Vector&)>;
  using DerivativeBuilder = std::function<LinearOperator<Scalar>(const Vector&, Index)>;

  Index m = 0;
  Index n = 0;
  Index r = 0;
  Builder operator_at;
  /// dA/dy_j at y.
  DerivativeBuilder derivative_at;
  std::function<bool(const Vector&)> feasible = [](const Vector&) { return true; };

  LinearOperator<Scalar> A(const Vector& y) const {
    check_parameter(y);
    LinearOperator<Scalar> op = operator_at(y);
    if (op.rows() != m || op.cols() != n) throw InvalidArgument("model: operator has wrong dimensions");
    return op;
  }

  LinearOperator<Scalar> dA(const Vector& y, Index j) const {
    check_parameter(y);
    if (j < 0 || j >= r) throw InvalidArgument("model: derivative index out of range");
    LinearOperator<Scalar> op = derivative_at(y, j);
    if (op.rows() != m || op.cols() != n) throw InvalidArgument("model: derivative has wrong dimensions");
    return op;
  }

 private:
  void check_parameter(const Vector& y) const {
    if (y.size() != r)
      throw InvalidArgument("model: parameter has length " + std::to_string(y.size()) + ", expected " +
                            std::to_string(r));
    if (!feasible(y)) throw InvalidArgument("model: parameter outside the feasible region");
  }
};

}  // namespace varpro
