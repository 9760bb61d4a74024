#pragma once

#include <Eigen/QR>

#include "varpro/direct.hpp"
#include "varpro/model.hpp"

namespace varpro {

/// [A x - b; lambda L x], the stacked residual of the regularized problem.
template <typename Scalar>
VectorX<Scalar> reduced_residual(const StackedOperator<Scalar>& op, const VectorX<Scalar>& x,
                                 const VectorX<Scalar>& b) {
  if (x.size() != op.cols()) throw InvalidArgument("reduced_residual: x length mismatch");
  return op.apply(x) - op.pad_data(b);
}

template <typename Scalar>
VectorX<Scalar> reduced_residual(const SeparableModel<Scalar>& model, const VectorX<Scalar>& y,
                                 const VectorX<Scalar>& x, const VectorX<Scalar>& b,
                                 const LinearOperator<Scalar>& L, Scalar lambda) {
  return reduced_residual(stack(model.A(y), L, lambda), x, b);
}

/// f_{lambda,L}(y) with the inner problem solved directly.
template <typename Scalar>
VectorX<Scalar> exact_reduced_residual(const SeparableModel<Scalar>& model, const VectorX<Scalar>& y,
                                       const VectorX<Scalar>& b, const LinearOperator<Scalar>& L, Scalar lambda) {
  const StackedOperator<Scalar> op = stack(model.A(y), L, lambda);
  return reduced_residual(op, direct_solve(op, b), b);
}

namespace detail {

// Column j: P_perp [dA_j x; 0] + (S^dagger)^T dA_j^T (b - A x).
template <typename Scalar>
MatrixX<Scalar> jacobian_at(const SeparableModel<Scalar>& model, const VectorX<Scalar>& y,
                            const DirectFactorization<Scalar>& fact, const VectorX<Scalar>& x,
                            const VectorX<Scalar>& b) {
  const StackedOperator<Scalar>& op = fact.op();
  if (x.size() != op.cols()) throw InvalidArgument("jacobian: x length mismatch");
  if (b.size() != op.top_rows()) throw InvalidArgument("jacobian: b length mismatch");
  const VectorX<Scalar> data_residual = b - op.top().apply(x);
  MatrixX<Scalar> J(op.rows(), model.r);
  for (Index j = 0; j < model.r; ++j) {
    const LinearOperator<Scalar> dA = model.dA(y, j);
    VectorX<Scalar> lifted = VectorX<Scalar>::Zero(op.rows());
    lifted.head(op.top_rows()) = dA.apply(x);
    J.col(j) = apply_projector_perp(fact, lifted) + apply_pinv_transpose(fact, dA.apply_transpose(data_residual));
  }
  return J;
}

}  // namespace detail

/// Jacobian of y -> f_{lambda,L}(y) at the exact inner solution x = x(y).
template <typename Scalar>
MatrixX<Scalar> exact_jacobian(const SeparableModel<Scalar>& model, const VectorX<Scalar>& y,
                               const DirectFactorization<Scalar>& fact, const VectorX<Scalar>& x,
                               const VectorX<Scalar>& b) {
  return detail::jacobian_at(model, y, fact, x, b);
}

/// The same assembly with x(y) replaced by an approximate inner solution x_bar.
template <typename Scalar>
MatrixX<Scalar> approx_jacobian(const SeparableModel<Scalar>& model, const VectorX<Scalar>& y,
                                const DirectFactorization<Scalar>& fact, const VectorX<Scalar>& x_bar,
                                const VectorX<Scalar>& b) {
  return detail::jacobian_at(model, y, fact, x_bar, b);
}

/// J^T f.
template <typename Derived, typename OtherDerived>
VectorX<typename Derived::Scalar> gradient(const Eigen::MatrixBase<Derived>& J,
                                           const Eigen::MatrixBase<OtherDerived>& f) {
  if (J.rows() != f.size()) throw InvalidArgument("gradient: dimension mismatch");
  return J.transpose() * f;
}

/// argmin_s ||J s + g||, by column-pivoted Householder QR.
template <typename Derived, typename OtherDerived>
VectorX<typename Derived::Scalar> gauss_newton_step(const Eigen::MatrixBase<Derived>& J,
                                                    const Eigen::MatrixBase<OtherDerived>& g) {
  using Scalar = typename Derived::Scalar;
  if (J.rows() != g.size()) throw InvalidArgument("gauss_newton_step: dimension mismatch");
  if (J.rows() < J.cols()) throw SingularStepError("gauss_newton_step: more parameters than residuals");
  if (g.isZero(Scalar(0))) return VectorX<Scalar>::Zero(J.cols());
  Eigen::ColPivHouseholderQR<MatrixX<Scalar>> qr(J);
  if (qr.rank() < J.cols()) throw SingularStepError("gauss_newton_step: Jacobian is rank deficient");
  return -qr.solve(VectorX<Scalar>(g));
}

}  // namespace varpro
