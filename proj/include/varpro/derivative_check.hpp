#pragma once

#include <algorithm>
#include <cmath>

#include "varpro/reduced.hpp"

namespace varpro {

/// Central differences of y -> f_{lambda,L}(y), step h_j = rel_step * max(1, |y_j|).
template <typename Scalar>
MatrixX<Scalar> finite_difference_jacobian(const SeparableModel<Scalar>& model, const VectorX<Scalar>& y,
                                           const VectorX<Scalar>& b, const LinearOperator<Scalar>& L, Scalar lambda,
                                           Scalar rel_step) {
  if (!(rel_step > Scalar(0))) throw InvalidArgument("finite_difference_jacobian: step must be positive");
  MatrixX<Scalar> J;
  for (Index j = 0; j < model.r; ++j) {
    const Scalar h = rel_step * std::max(Scalar(1), std::abs(y(j)));
    VectorX<Scalar> yp = y, ym = y;
    yp(j) += h;
    ym(j) -= h;
    const VectorX<Scalar> col =
        (exact_reduced_residual(model, yp, b, L, lambda) - exact_reduced_residual(model, ym, b, L, lambda)) /
        (Scalar(2) * h);
    if (j == 0) J.resize(col.size(), model.r);
    J.col(j) = col;
  }
  return J;
}

/// Central differences of y -> 1/2 ||f_{lambda,L}(y)||^2.
template <typename Scalar>
VectorX<Scalar> finite_difference_gradient(const SeparableModel<Scalar>& model, const VectorX<Scalar>& y,
                                           const VectorX<Scalar>& b, const LinearOperator<Scalar>& L, Scalar lambda,
                                           Scalar rel_step) {
  if (!(rel_step > Scalar(0))) throw InvalidArgument("finite_difference_gradient: step must be positive");
  VectorX<Scalar> g(model.r);
  for (Index j = 0; j < model.r; ++j) {
    const Scalar h = rel_step * std::max(Scalar(1), std::abs(y(j)));
    VectorX<Scalar> yp = y, ym = y;
    yp(j) += h;
    ym(j) -= h;
    const Scalar fp = Scalar(0.5) * exact_reduced_residual(model, yp, b, L, lambda).squaredNorm();
    const Scalar fm = Scalar(0.5) * exact_reduced_residual(model, ym, b, L, lambda).squaredNorm();
    g(j) = (fp - fm) / (Scalar(2) * h);
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||), and 0 when both vanish.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar relative_difference(const Eigen::MatrixBase<DerivedA>& a,
                                              const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  const Scalar scale = std::max(a.norm(), b.norm());
  return scale == Scalar(0) ? Scalar(0) : (a - b).norm() / scale;
}

template <typename Scalar>
struct DerivativeCheck {
  MatrixX<Scalar> jacobian;
  MatrixX<Scalar> jacobian_fd;
  VectorX<Scalar> gradient;
  VectorX<Scalar> gradient_fd;
  Scalar jacobian_error = Scalar(0);
  Scalar gradient_error = Scalar(0);
};

/// Analytic Jacobian and gradient at y against central differences (Frobenius/2-norm relative errors).
template <typename Scalar>
DerivativeCheck<Scalar> check_derivatives(const SeparableModel<Scalar>& model, const VectorX<Scalar>& y,
                                          const VectorX<Scalar>& b, const LinearOperator<Scalar>& L, Scalar lambda,
                                          Scalar jacobian_step, Scalar gradient_step) {
  const StackedOperator<Scalar> op = stack(model.A(y), L, lambda);
  const DirectFactorization<Scalar> fact(op);
  const VectorX<Scalar> x = fact.solve_data(b);
  const VectorX<Scalar> f = reduced_residual(op, x, b);
  DerivativeCheck<Scalar> out;
  out.jacobian = exact_jacobian(model, y, fact, x, b);
  out.gradient = gradient(out.jacobian, f);
  out.jacobian_fd = finite_difference_jacobian(model, y, b, L, lambda, jacobian_step);
  out.gradient_fd = finite_difference_gradient(model, y, b, L, lambda, gradient_step);
  out.jacobian_error = relative_difference(out.jacobian, out.jacobian_fd);
  out.gradient_error = relative_difference(out.gradient, out.gradient_fd);
  return out;
}

}  // namespace varpro
