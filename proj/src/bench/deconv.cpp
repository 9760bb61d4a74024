#include "varpro/bench/deconv.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "varpro/direct.hpp"
#include "varpro/linops.hpp"
#include "varpro/reduced.hpp"

namespace varpro::bench {

void BenchConfig::validate() const {
  if (n < 8) throw ConfigError("problem.n", "must be at least 8");
  if (!(sigma_true > 0.0)) throw ConfigError("problem.sigma_true", "must be positive");
  if (!(noise_level >= 0.0)) throw ConfigError("problem.noise_level", "must be nonnegative");
  if (!(lambda > 0.0)) throw ConfigError("problem.lambda", "must be positive");
  if (!(tau > 0.0)) throw ConfigError("problem.tau", "must be positive");
  if (y0.empty()) throw ConfigError("problem.y0", "needs at least one starting value");
  for (double y : y0)
    if (!(y > 0.0)) throw ConfigError("problem.y0", "starting values must be positive");
  if (signal != "piecewise" && signal != "gaussian-bumps") throw ConfigError("problem.signal", "unknown signal '" + signal + "'");
  if (model != "gaussian" && model != "constant") throw ConfigError("problem.model", "unknown model '" + model + "'");
}

VectorXd default_signal(Index n, std::string_view shape) {
  if (n < 8) throw ConfigError("problem.n", "signals need n >= 8");
  VectorXd x = VectorXd::Zero(n);
  const double h = 1.0 / static_cast<double>(n - 1);
  if (shape == "piecewise") {
    // plateau, ramp, smooth bump, separated by zeros
    for (Index i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) * h;
      if (t >= 0.1 && t < 0.3) {
        x(i) = 0.6;
      } else if (t >= 0.4 && t < 0.6) {
        x(i) = (t - 0.4) / 0.2;
      } else if (t >= 0.7 && t <= 0.9) {
        const double s = std::sin(std::numbers::pi * (t - 0.7) / 0.2);
        x(i) = 0.8 * s * s;
      }
    }
  } else if (shape == "gaussian-bumps") {
    for (Index i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) * h;
      const double a = (t - 0.3) / 0.05;
      const double c = (t - 0.7) / 0.08;
      x(i) = std::sin(std::numbers::pi * t) * (0.9 * std::exp(-0.5 * a * a) + 0.6 * std::exp(-0.5 * c * c));
    }
  } else {
    throw ConfigError("problem.signal", "unknown signal '" + std::string(shape) + "'");
  }
  x(0) = 0.0;
  x(n - 1) = 0.0;
  return x;
}

LinearOperator<double> build_regularizer(const VectorXd& x_true, double tau) {
  if (!(tau > 0.0)) throw InvalidArgument("build_regularizer: tau must be positive");
  const Index n = x_true.size();
  const LinearOperator<double> D = first_difference<double>(n);
  const VectorXd dx = D.apply(x_true);
  const VectorXd w = (dx.cwiseAbs().array() + tau).rsqrt().matrix();
  Eigen::SparseMatrix<double> wd = w.asDiagonal() * D.to_dense().sparseView();
  return LinearOperator<double>::sparse(std::move(wd));
}

SeparableModel<double> gaussian_blur_model(Index n) {
  SeparableModel<double> model;
  model.m = n;
  model.n = n;
  model.r = 1;
  model.operator_at = [n](const VectorXd& y) { return gaussian_toeplitz(y(0), n); };
  model.derivative_at = [n](const VectorXd& y, Index) { return gaussian_toeplitz_derivative(y(0), n); };
  model.feasible = [](const VectorXd& y) { return y.size() == 1 && y(0) > 0.0 && std::isfinite(y(0)); };
  return model;
}

SeparableModel<double> constant_model(const LinearOperator<double>& A, Index r) {
  SeparableModel<double> model;
  model.m = A.rows();
  model.n = A.cols();
  model.r = r;
  model.operator_at = [A](const VectorXd&) { return A; };
  const LinearOperator<double> zero = LinearOperator<double>::dense(Eigen::MatrixXd::Zero(A.rows(), A.cols()));
  model.derivative_at = [zero](const VectorXd&, Index) { return zero; };
  return model;
}

SeparableModel<double> scaled_derivative_model(SeparableModel<double> model, double factor) {
  auto inner = model.derivative_at;
  model.derivative_at = [inner, factor](const VectorXd& y, Index j) {
    return LinearOperator<double>::dense(factor * inner(y, j).to_dense());
  };
  return model;
}

ProblemInstance build_problem(const BenchConfig& cfg) {
  cfg.validate();
  ProblemInstance p;
  p.x_true = default_signal(cfg.n, cfg.signal);
  const LinearOperator<double> a_true = gaussian_toeplitz(cfg.sigma_true, cfg.n);
  p.model = cfg.model == "constant" ? constant_model(a_true) : gaussian_blur_model(cfg.n);
  p.b_true = a_true.apply(p.x_true);
  p.L = build_regularizer(p.x_true, cfg.tau);
  p.lambda = cfg.lambda;
  p.seed = cfg.seed;

  if (cfg.noise_level == 0.0) {
    p.b = p.b_true;
  } else {
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    VectorXd e(cfg.n);
    for (Index i = 0; i < cfg.n; ++i) e(i) = normal(rng);
    e *= cfg.noise_level * p.b_true.norm() / e.norm();
    p.b = p.b_true + e;
  }
  p.noise_ratio = (p.b - p.b_true).norm() / p.b_true.norm();
  return p;
}

double reduced_objective(const ProblemInstance& p, const VectorXd& y) {
  const StackedOperator<double> op = stack(p.model.A(y), p.L, p.lambda);
  const VectorXd x = direct_solve(op, p.b);
  return 0.5 * reduced_residual(op, x, p.b).squaredNorm();
}

GridMinimum grid_minimize(const ProblemInstance& p, double lo, double hi, double step) {
  if (p.model.r != 1) throw InvalidArgument("grid_minimize: only r = 1 models");
  if (!(step > 0.0) || !(hi >= lo)) throw InvalidArgument("grid_minimize: bad grid");
  const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  GridMinimum best{lo, std::numeric_limits<double>::infinity()};
  VectorXd y(1);
  for (long i = 0; i <= count; ++i) {
    y(0) = lo + static_cast<double>(i) * step;
    const double v = reduced_objective(p, y);
    if (v < best.value) best = {y(0), v};
  }
  return best;
}

double relative_error(const VectorXd& x, const VectorXd& x_true) { return (x - x_true).norm() / x_true.norm(); }

}  // namespace varpro::bench
