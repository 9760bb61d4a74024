#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "varpro/model.hpp"

namespace varpro::bench {

using Eigen::VectorXd;

/// 1D blind deconvolution benchmark: Gaussian blur of unknown width, weighted TV-like regularizer.
struct BenchConfig {
  Index n = 128;
  double sigma_true = 3.0;
  /// ||b - b_true|| / ||b_true||, enforced exactly.
  double noise_level = 0.05;
  double lambda = 0.0379;
  std::uint64_t seed = 20240501;
  std::vector<double> y0{2.0, 4.0};
  /// Offset in the regularizer weights (|(D x_true)_i| + tau)^(-1/2).
  double tau = 1e-8;
  std::string signal = "piecewise";
  /// "gaussian" or "constant" (A fixed at sigma_true, zero derivative).
  std::string model = "gaussian";

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct ProblemInstance {
  SeparableModel<double> model;
  VectorXd b;
  VectorXd b_true;
  VectorXd x_true;
  LinearOperator<double> L;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  /// Measured ||b - b_true|| / ||b_true||.
  double noise_ratio = 0.0;
};

/// Built-in test signals with zero end values and entries in [0, 1]: "piecewise" and "gaussian-bumps".
VectorXd default_signal(Index n, std::string_view shape);

/// W D with W_ii = (|(D x_true)_i| + tau)^(-1/2), so ||L x_true||^2 approximates ||D x_true||_1.
LinearOperator<double> build_regularizer(const VectorXd& x_true, double tau);

/// y = (sigma) -> symmetric Toeplitz Gaussian blur, analytic derivative, feasible for sigma > 0.
SeparableModel<double> gaussian_blur_model(Index n);

/// A(y) = A for every y, with a zero derivative.
SeparableModel<double> constant_model(const LinearOperator<double>& A, Index r = 1);

/// Same model with every derivative scaled by `factor` (negative control for derivative checks).
SeparableModel<double> scaled_derivative_model(SeparableModel<double> model, double factor);

/// Deterministic given cfg.seed.
ProblemInstance build_problem(const BenchConfig& cfg);

/// 1/2 ||f_{lambda,L}(y)||^2 with an exact inner solve.
double reduced_objective(const ProblemInstance& p, const VectorXd& y);

struct GridMinimum {
  double y = 0.0;
  double value = 0.0;
};

/// Minimizer of reduced_objective over lo, lo + step, ..., hi (r = 1 models).
GridMinimum grid_minimize(const ProblemInstance& p, double lo, double hi, double step);

/// ||x - x_true|| / ||x_true||.
double relative_error(const VectorXd& x, const VectorXd& x_true);

}  // namespace varpro::bench
