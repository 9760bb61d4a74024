#pragma once

#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "varpro/linear_operator.hpp"

namespace varpro {

/// How ||M||_2 is obtained inside the relative-gradient stopping test.
enum class NormEstimate {
  /// Running sqrt(sum alpha_i^2 + beta_i^2) of the Golub-Kahan bidiagonal (Paige-Saunders).
  InternalBidiagonal,
  /// Largest singular value of the materialized operator.
  ExplicitSvd,
};

template <typename Scalar>
struct LsqrOptions {
  Scalar tolerance = Scalar(1e-8);
  int max_iterations = 10000;
  NormEstimate norm_estimate = NormEstimate::InternalBidiagonal;
  /// Precomputed ||M||_2 for ExplicitSvd mode; computed on demand when absent.
  std::optional<Scalar> operator_norm;
  bool record_history = false;
};

template <typename Scalar>
struct InnerSolution {
  VectorX<Scalar> x_bar;
  /// d - M x_bar, recomputed from the returned iterate.
  VectorX<Scalar> residual;
  int iterations = 0;
  /// ||M^T r|| / (||r|| ||M||) at the returned iterate.
  Scalar achieved_criterion = Scalar(0);
  Scalar operator_norm_estimate = Scalar(0);
  bool converged = false;
  /// Criterion value at every iteration, when requested.
  std::vector<Scalar> criterion_history;
};

template <typename Scalar>
Scalar operator_two_norm(const StackedOperator<Scalar>& op) {
  Eigen::JacobiSVD<MatrixX<Scalar>> svd(op.to_dense());
  return svd.singularValues()(0);
}

/// LSQR for min ||M x - d|| with the relative-gradient stopping test
///
///     ||M^T r_i|| / (||r_i|| ||M||) < tolerance,   r_i = d - M x_i,
///
/// evaluated on the true residual of every iterate. When the test holds, x_bar
/// solves exactly a nearby problem with ||E|| < tolerance * ||M||.
///
/// If max_iterations is exhausted, the iterate with the smallest criterion is
/// returned with converged = false.
template <typename Scalar>
InnerSolution<Scalar> lsqr_solve(const StackedOperator<Scalar>& op, const VectorX<Scalar>& d,
                                 const LsqrOptions<Scalar>& opts) {
  using Vector = VectorX<Scalar>;
  if (!(opts.tolerance > Scalar(0))) throw InvalidArgument("lsqr: tolerance must be positive");
  if (opts.max_iterations < 1) throw InvalidArgument("lsqr: max_iterations must be >= 1");
  if (d.size() != op.rows()) throw InvalidArgument("lsqr: right-hand side length mismatch");
  if (!d.allFinite()) throw NumericalBreakdown("lsqr: non-finite right-hand side");

  const Index n = op.cols();
  InnerSolution<Scalar> out;
  out.x_bar = Vector::Zero(n);
  out.residual = d;

  const bool explicit_norm = opts.norm_estimate == NormEstimate::ExplicitSvd;
  Scalar norm_m = Scalar(0);
  if (explicit_norm) norm_m = opts.operator_norm ? *opts.operator_norm : operator_two_norm(op);

  Vector u = d;
  Scalar beta = u.norm();
  if (beta == Scalar(0)) {
    out.converged = true;
    out.operator_norm_estimate = norm_m;
    return out;
  }
  u /= beta;
  Vector v = op.apply_transpose(u);
  Scalar alpha = v.norm();
  if (alpha == Scalar(0)) {
    // d is orthogonal to range(M): x = 0 is the least-squares solution.
    out.converged = true;
    out.operator_norm_estimate = norm_m;
    return out;
  }
  v /= alpha;

  Vector w = v;
  Vector x = Vector::Zero(n);
  Scalar phibar = beta;
  Scalar rhobar = alpha;
  Scalar anorm_sq = Scalar(0);

  Scalar best = std::numeric_limits<Scalar>::infinity();
  Vector best_x = x;
  Scalar best_norm = norm_m;

  auto finish = [&](const Vector& xf, Scalar crit, Scalar used_norm, bool converged) {
    out.x_bar = xf;
    out.residual = d - op.apply(xf);
    out.achieved_criterion = crit;
    out.operator_norm_estimate = used_norm;
    out.converged = converged;
    return out;
  };

  for (int it = 1; it <= opts.max_iterations; ++it) {
    u = op.apply(v) - alpha * u;
    beta = u.norm();
    if (beta > Scalar(0)) u /= beta;
    anorm_sq += alpha * alpha + beta * beta;

    v = op.apply_transpose(u) - beta * v;
    alpha = v.norm();
    if (alpha > Scalar(0)) v /= alpha;

    const Scalar rho = std::hypot(rhobar, beta);
    const Scalar c = rhobar / rho;
    const Scalar s = beta / rho;
    const Scalar theta = s * alpha;
    rhobar = -c * alpha;
    const Scalar phi = c * phibar;
    phibar = s * phibar;

    x += (phi / rho) * w;
    w = v - (theta / rho) * w;

    const Vector r = d - op.apply(x);
    const Scalar r_norm = r.norm();
    const Scalar used_norm = explicit_norm ? norm_m : std::sqrt(anorm_sq);
    out.iterations = it;

    if (!x.allFinite() || !std::isfinite(static_cast<double>(r_norm)))
      throw NumericalBreakdown("lsqr: non-finite iterate at iteration " + std::to_string(it));

    // a residual at the rounding floor means the system is compatible and x is exact
    const Scalar floor = Scalar(8) * std::numeric_limits<Scalar>::epsilon() * (used_norm * x.norm() + d.norm());
    if (r_norm <= floor) {
      if (opts.record_history) out.criterion_history.push_back(Scalar(0));
      return finish(x, Scalar(0), used_norm, true);
    }
    const Scalar crit = op.apply_transpose(r).norm() / (r_norm * used_norm);
    if (!std::isfinite(static_cast<double>(crit)))
      throw NumericalBreakdown("lsqr: non-finite criterion at iteration " + std::to_string(it));
    if (opts.record_history) out.criterion_history.push_back(crit);
    if (crit < opts.tolerance) return finish(x, crit, used_norm, true);
    if (crit < best) {
      best = crit;
      best_x = x;
      best_norm = used_norm;
    }
    // Krylov space exhausted; no further progress is possible.
    if (alpha == Scalar(0) || beta == Scalar(0)) break;
  }
  return finish(best_x, best, best_norm, false);
}

}  // namespace varpro
