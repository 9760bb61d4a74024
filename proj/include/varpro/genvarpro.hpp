#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "varpro/direct.hpp"
#include "varpro/lsqr.hpp"
#include "varpro/model.hpp"
#include "varpro/reduced.hpp"
#include "varpro/schedule.hpp"

namespace varpro {

template <typename Scalar>
struct OuterOptions {
  int max_outer_iterations = 50;
  /// Stop once ||t_k|| <= step_tolerance (the next iterate is still evaluated and recorded).
  Scalar step_tolerance = Scalar(1e-10);
  /// Stop once ||grad|| <= gradient_tolerance; 0 disables the test.
  Scalar gradient_tolerance = Scalar(0);
  /// Inner tolerances, used by the inexact variant only.
  ToleranceSchedule<Scalar> schedule;
  int lsqr_max_iterations = 10000;
  NormEstimate norm_estimate = NormEstimate::InternalBidiagonal;
  /// Also record the exact inner solution, objective and gradient at every iterate.
  bool diagnostics = false;
};

enum class TraceStatus {
  StepTolerance,
  GradientTolerance,
  /// The Jacobian vanished identically; y is a stationary point.
  Stationary,
  MaxIterations,
  /// The inner solve or the factorization failed.
  InnerFailure,
  SingularStep,
  /// The iterate left the feasible region or became non-finite.
  Diverged,
};

inline const char* to_string(TraceStatus s) {
  switch (s) {
    case TraceStatus::StepTolerance: return "step-tolerance";
    case TraceStatus::GradientTolerance: return "gradient-tolerance";
    case TraceStatus::Stationary: return "stationary";
    case TraceStatus::MaxIterations: return "max-iterations";
    case TraceStatus::InnerFailure: return "inner-failure";
    case TraceStatus::SingularStep: return "singular-step";
    case TraceStatus::Diverged: return "diverged";
  }
  return "unknown";
}

inline bool is_failure(TraceStatus s) {
  return s == TraceStatus::InnerFailure || s == TraceStatus::SingularStep || s == TraceStatus::Diverged;
}

template <typename Scalar>
struct IterationRecord {
  using Vector = VectorX<Scalar>;

  int k = 0;
  Vector y;
  /// x(y_k) for the exact method, x_bar_k for the inexact one.
  Vector x;
  /// 1/2 ||[A x - b; lambda L x]||^2 with the x above.
  Scalar objective = Scalar(0);
  /// J^T f (exact) or J_bar^T g (inexact).
  Vector gradient;
  /// Gauss-Newton step taken from this iterate; empty on the last record.
  Vector step;
  /// Inner tolerance eps_k; NaN for the exact method.
  Scalar tolerance = std::numeric_limits<Scalar>::quiet_NaN();
  int inner_iterations = 0;
  Scalar inner_criterion = Scalar(0);
  bool inner_converged = true;

  // Filled when OuterOptions::diagnostics is set.
  std::optional<Vector> x_exact;
  std::optional<Scalar> objective_exact;
  std::optional<Vector> gradient_exact;

  double inner_seconds = 0.0;
  double total_seconds = 0.0;
};

template <typename Scalar>
struct SolverTrace {
  std::vector<IterationRecord<Scalar>> records;
  TraceStatus status = TraceStatus::MaxIterations;
  std::string message;
  std::vector<std::string> warnings;

  bool failed() const { return is_failure(status); }
  const VectorX<Scalar>& final_y() const { return records.back().y; }
  long total_inner_iterations(int first_k_records = -1) const {
    long total = 0;
    const std::size_t count =
        first_k_records < 0 ? records.size() : std::min(records.size(), static_cast<std::size_t>(first_k_records));
    for (std::size_t i = 0; i < count; ++i) total += records[i].inner_iterations;
    return total;
  }
};

namespace detail {

template <typename Scalar>
struct InnerResult {
  VectorX<Scalar> x;
  Scalar tolerance = std::numeric_limits<Scalar>::quiet_NaN();
  int iterations = 0;
  Scalar criterion = Scalar(0);
  bool converged = true;
};

// Shared outer Gauss-Newton loop; `inner` supplies x (exact or approximate) at each iterate.
template <typename Scalar, typename InnerSolve>
SolverTrace<Scalar> outer_loop(const SeparableModel<Scalar>& model, const VectorX<Scalar>& b,
                               const LinearOperator<Scalar>& L, Scalar lambda, const VectorX<Scalar>& y0,
                               const OuterOptions<Scalar>& opts, InnerSolve&& inner, SolverTrace<Scalar> trace) {
  using Clock = std::chrono::steady_clock;
  using Vector = VectorX<Scalar>;
  if (opts.max_outer_iterations < 0) throw InvalidArgument("outer: max_outer_iterations must be >= 0");
  if (b.size() != model.m) throw InvalidArgument("outer: data length mismatch");

  Vector y = y0;
  bool last = false;
  for (int k = 0;; ++k) {
    const auto t0 = Clock::now();
    IterationRecord<Scalar> rec;
    rec.k = k;
    rec.y = y;
    MatrixX<Scalar> J;
    Vector g;
    try {
      const StackedOperator<Scalar> op = stack(model.A(y), L, lambda);
      const DirectFactorization<Scalar> fact(op);
      const auto ti = Clock::now();
      InnerResult<Scalar> in = inner(k, op, fact);
      rec.inner_seconds = std::chrono::duration<double>(Clock::now() - ti).count();
      rec.x = std::move(in.x);
      rec.tolerance = in.tolerance;
      rec.inner_iterations = in.iterations;
      rec.inner_criterion = in.criterion;
      rec.inner_converged = in.converged;
      if (!in.converged) {
        std::ostringstream w;
        w << "iteration " << k << ": inner solve hit the iteration limit (criterion " << in.criterion
          << ", tolerance " << in.tolerance << ")";
        trace.warnings.push_back(w.str());
      }
      g = reduced_residual(op, rec.x, b);
      J = approx_jacobian(model, y, fact, rec.x, b);
      rec.objective = Scalar(0.5) * g.squaredNorm();
      rec.gradient = gradient(J, g);
      if (opts.diagnostics) {
        Vector xe = fact.solve_data(b);
        const Vector fe = reduced_residual(op, xe, b);
        rec.objective_exact = Scalar(0.5) * fe.squaredNorm();
        rec.gradient_exact = gradient(exact_jacobian(model, y, fact, xe, b), fe);
        rec.x_exact = std::move(xe);
      }
    } catch (const std::exception& e) {
      trace.status = TraceStatus::InnerFailure;
      trace.message = "iteration " + std::to_string(k) + ": " + e.what();
      return trace;
    }

    auto finish = [&](TraceStatus status) {
      rec.total_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
      trace.records.push_back(std::move(rec));
      trace.status = status;
    };

    std::optional<TraceStatus> stop;
    if (last) {
      stop = TraceStatus::StepTolerance;
    } else if (k >= opts.max_outer_iterations) {
      stop = TraceStatus::MaxIterations;
    } else if (J.isZero(Scalar(0))) {
      stop = TraceStatus::Stationary;
    } else if (opts.gradient_tolerance > Scalar(0) && rec.gradient.norm() <= opts.gradient_tolerance) {
      stop = TraceStatus::GradientTolerance;
    }
    if (stop) {
      finish(*stop);
      return trace;
    }

    try {
      rec.step = gauss_newton_step(J, g);
    } catch (const SingularStepError& e) {
      trace.message = e.what();
      finish(TraceStatus::SingularStep);
      return trace;
    }
    const Scalar step_norm = rec.step.norm();
    y += rec.step;
    rec.total_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    trace.records.push_back(std::move(rec));

    if (!y.allFinite() || !model.feasible(y)) {
      trace.status = TraceStatus::Diverged;
      trace.message = "iterate " + std::to_string(k + 1) + " left the feasible region";
      return trace;
    }
    if (step_norm <= opts.step_tolerance) last = true;
  }
}

}  // namespace detail

/// Gauss-Newton on the reduced functional with exact inner solves (Cholesky on the
/// normal equations) and the exact Jacobian. Unit step length, no globalization.
template <typename Scalar>
SolverTrace<Scalar> genvarpro(const SeparableModel<Scalar>& model, const VectorX<Scalar>& b,
                              const LinearOperator<Scalar>& L, Scalar lambda, const VectorX<Scalar>& y0,
                              const OuterOptions<Scalar>& opts) {
  auto inner = [&](int, const StackedOperator<Scalar>&, const DirectFactorization<Scalar>& fact) {
    detail::InnerResult<Scalar> out;
    out.x = fact.solve_data(b);
    return out;
  };
  return detail::outer_loop(model, b, L, lambda, y0, opts, inner, SolverTrace<Scalar>{});
}

/// Gauss-Newton with inner solves by LSQR stopped at eps_k from the schedule, and the
/// Jacobian assembled around the approximate solution x_bar_k.
///
/// A warning is recorded when eps_0 * kappa_2([A(y0); lambda L]) >= 1, since the
/// inner error bounds do not hold there; the run continues regardless.
template <typename Scalar>
SolverTrace<Scalar> inexact_genvarpro(const SeparableModel<Scalar>& model, const VectorX<Scalar>& b,
                                      const LinearOperator<Scalar>& L, Scalar lambda, const VectorX<Scalar>& y0,
                                      const OuterOptions<Scalar>& opts) {
  SolverTrace<Scalar> trace;
  try {
    const Scalar kappa0 = condition_number(stack(model.A(y0), L, lambda));
    const Scalar eps0 = opts.schedule.at(0);
    if (eps0 * kappa0 >= Scalar(1)) {
      std::ostringstream w;
      w << "eps0 * kappa = " << eps0 * kappa0 << " >= 1 at y0; inner error bounds do not apply";
      trace.warnings.push_back(w.str());
    }
  } catch (const RankDeficiency& e) {
    trace.warnings.push_back(std::string("could not check the eps0 precondition: ") + e.what());
  }

  auto inner = [&](int k, const StackedOperator<Scalar>& op, const DirectFactorization<Scalar>&) {
    LsqrOptions<Scalar> lo;
    lo.tolerance = opts.schedule.at(k);
    lo.max_iterations = opts.lsqr_max_iterations;
    lo.norm_estimate = opts.norm_estimate;
    InnerSolution<Scalar> sol = lsqr_solve(op, op.pad_data(b), lo);
    detail::InnerResult<Scalar> out;
    out.x = std::move(sol.x_bar);
    out.tolerance = lo.tolerance;
    out.iterations = sol.iterations;
    out.criterion = sol.achieved_criterion;
    out.converged = sol.converged;
    return out;
  };
  return detail::outer_loop(model, b, L, lambda, y0, opts, inner, std::move(trace));
}

}  // namespace varpro
