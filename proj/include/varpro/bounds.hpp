#pragma once

#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include "varpro/direct.hpp"
#include "varpro/model.hpp"
#include "varpro/reduced.hpp"

namespace varpro {

namespace detail {

template <typename Scalar>
void check_bound_inputs(Scalar kappa, Scalar b_norm, Scalar epsilon, const char* who) {
  if (!(kappa > Scalar(0)) || !(b_norm >= Scalar(0)) || !(epsilon >= Scalar(0)))
    throw InvalidArgument(std::string(who) + ": inputs must be nonnegative (kappa positive)");
  if (epsilon * kappa >= Scalar(1)) {
    std::ostringstream msg;
    msg << who << ": epsilon * kappa = " << epsilon * kappa << " >= 1";
    throw BoundInvalid(msg.str());
  }
}

}  // namespace detail

/// Upper bound on ||x - x_bar|| for an inner solve stopped at relative-gradient tolerance epsilon:
///
///     2 kappa^2 / (1 - epsilon kappa) * ||b|| / ||M|| * epsilon.
template <typename Scalar>
Scalar solution_bound(Scalar kappa, Scalar b_norm, Scalar op_norm, Scalar epsilon) {
  detail::check_bound_inputs(kappa, b_norm, epsilon, "solution_bound");
  if (!(op_norm > Scalar(0))) throw InvalidArgument("solution_bound: op_norm must be positive");
  return Scalar(2) * kappa * kappa / (Scalar(1) - epsilon * kappa) * (b_norm / op_norm) * epsilon;
}

/// Upper bound on the stacked-residual error: 2 kappa / (1 - epsilon kappa) * ||b|| * epsilon.
template <typename Scalar>
Scalar residual_bound(Scalar kappa, Scalar b_norm, Scalar epsilon) {
  detail::check_bound_inputs(kappa, b_norm, epsilon, "residual_bound");
  return Scalar(2) * kappa / (Scalar(1) - epsilon * kappa) * b_norm * epsilon;
}

/// Upper bound on ||J_bar - J||_2:
///
///     4 sqrt(r (m + q)) max_j ||dA/dy_j|| kappa^2 / (1 - epsilon kappa) * ||b|| / ||M|| * epsilon.
template <typename Scalar>
Scalar jacobian_bound(Index r, Index m, Index q, Scalar max_deriv_norm, Scalar kappa, Scalar b_norm,
                      Scalar op_norm, Scalar epsilon) {
  detail::check_bound_inputs(kappa, b_norm, epsilon, "jacobian_bound");
  if (r < 1 || m < 1 || q < 0) throw InvalidArgument("jacobian_bound: invalid dimensions");
  if (!(max_deriv_norm >= Scalar(0))) throw InvalidArgument("jacobian_bound: negative derivative norm");
  if (!(op_norm > Scalar(0))) throw InvalidArgument("jacobian_bound: op_norm must be positive");
  const Scalar dims = std::sqrt(static_cast<Scalar>(r) * static_cast<Scalar>(m + q));
  return Scalar(4) * dims * max_deriv_norm * kappa * kappa / (Scalar(1) - epsilon * kappa) * (b_norm / op_norm) *
         epsilon;
}

/// Rank-one E = -r r^T M / ||r||^2 with r = d - M x_bar. x_bar solves min ||(M + E) x - d|| exactly,
/// and ||E|| = ||M^T r|| / ||r||. Returns zero when r = 0.
template <typename Scalar>
MatrixX<Scalar> backward_perturbation(const MatrixX<Scalar>& M, const VectorX<Scalar>& x_bar,
                                      const VectorX<Scalar>& d) {
  if (x_bar.size() != M.cols() || d.size() != M.rows())
    throw InvalidArgument("backward_perturbation: dimension mismatch");
  const VectorX<Scalar> r = d - M * x_bar;
  const Scalar rr = r.squaredNorm();
  if (rr == Scalar(0)) return MatrixX<Scalar>::Zero(M.rows(), M.cols());
  return -(r * (r.transpose() * M)) / rr;
}

/// safety / kappa0, a starting tolerance with eps0 * kappa0 well below one.
template <typename Scalar>
Scalar initial_tolerance(Scalar kappa0, Scalar safety = Scalar(0.1)) {
  if (!(kappa0 >= Scalar(1))) throw InvalidArgument("initial_tolerance: kappa0 must be >= 1");
  if (!(safety > Scalar(0))) throw InvalidArgument("initial_tolerance: safety must be positive");
  return safety / kappa0;
}

template <typename Scalar>
struct BoundReport {
  Scalar epsilon = Scalar(0);
  Scalar kappa = Scalar(0);
  Scalar b_norm = Scalar(0);
  Scalar op_norm = Scalar(0);
  /// Empty when the report is not valid.
  std::optional<Scalar> solution_bound;
  std::optional<Scalar> residual_bound;
  std::optional<Scalar> jacobian_bound;
  /// epsilon * kappa < 1.
  bool valid = false;
};

template <typename Scalar>
BoundReport<Scalar> make_bound_report(Scalar epsilon, Scalar kappa, Scalar b_norm, Scalar op_norm, Index r, Index m,
                                      Index q, Scalar max_deriv_norm) {
  BoundReport<Scalar> rep;
  rep.epsilon = epsilon;
  rep.kappa = kappa;
  rep.b_norm = b_norm;
  rep.op_norm = op_norm;
  rep.valid = epsilon * kappa < Scalar(1);
  if (rep.valid) {
    rep.solution_bound = solution_bound(kappa, b_norm, op_norm, epsilon);
    rep.residual_bound = residual_bound(kappa, b_norm, epsilon);
    rep.jacobian_bound = jacobian_bound(r, m, q, max_deriv_norm, kappa, b_norm, op_norm, epsilon);
  }
  return rep;
}

/// Measured errors of one approximate inner solve against the exact solve, with the bounds.
template <typename Scalar>
struct InnerSolveCheck {
  BoundReport<Scalar> report;
  Scalar solution_error = Scalar(0);
  Scalar residual_error = Scalar(0);
  Scalar jacobian_error = Scalar(0);
  Scalar max_derivative_norm = Scalar(0);

  bool solution_violated() const { return report.valid && solution_error > *report.solution_bound; }
  bool residual_violated() const { return report.valid && residual_error > *report.residual_bound; }
  bool jacobian_violated() const { return report.valid && jacobian_error > *report.jacobian_bound; }
  bool any_violated() const { return solution_violated() || residual_violated() || jacobian_violated(); }
};

/// Compares x_bar (computed at tolerance epsilon) with the direct solve at y, using SVD norms.
template <typename Scalar>
InnerSolveCheck<Scalar> verify_inner_solve(const SeparableModel<Scalar>& model, const VectorX<Scalar>& y,
                                           const VectorX<Scalar>& b, const LinearOperator<Scalar>& L, Scalar lambda,
                                           const VectorX<Scalar>& x_bar, Scalar epsilon) {
  const StackedOperator<Scalar> op = stack(model.A(y), L, lambda);
  const DirectFactorization<Scalar> fact(op);
  const VectorX<Scalar> sv = singular_values<Scalar>(fact.dense());
  const Scalar op_norm = sv(0);
  const Scalar kappa = sv(0) / sv(sv.size() - 1);

  Scalar max_deriv = Scalar(0);
  for (Index j = 0; j < model.r; ++j)
    max_deriv = std::max(max_deriv, singular_values<Scalar>(model.dA(y, j).to_dense())(0));

  const VectorX<Scalar> x = fact.solve_data(b);
  const VectorX<Scalar> d = op.pad_data(b);
  const MatrixX<Scalar> J = exact_jacobian(model, y, fact, x, b);
  const MatrixX<Scalar> J_bar = approx_jacobian(model, y, fact, x_bar, b);

  InnerSolveCheck<Scalar> out;
  out.report = make_bound_report(epsilon, kappa, b.norm(), op_norm, model.r, op.top_rows(), op.bottom_rows(),
                                 max_deriv);
  out.max_derivative_norm = max_deriv;
  out.solution_error = (x - x_bar).norm();
  out.residual_error = ((d - op.apply(x)) - (d - op.apply(x_bar))).norm();
  out.jacobian_error = singular_values<Scalar>(J_bar - J)(0);
  return out;
}

}  // namespace varpro
