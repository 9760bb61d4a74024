#include <doctest.h>

#include <chrono>
#include <cmath>

#include "support/oracles.hpp"
#include "varpro/bench/deconv.hpp"
#include "varpro/varpro.hpp"

using namespace varpro;
using namespace varpro::bench;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("build_problem: zero noise leaves the exact data") {
  BenchConfig cfg;
  cfg.noise_level = 0.0;
  const auto p = build_problem(cfg);
  CHECK(p.b == p.b_true);
  CHECK(p.noise_ratio == 0.0);
}

TEST_CASE("build_problem: the default noise ratio is exact") {
  const auto p = build_problem(BenchConfig{});
  const double ratio = (p.b - p.b_true).norm() / p.b_true.norm();
  CHECK(std::abs(ratio - 0.05) <= 1e-12);
  CHECK(std::abs(p.noise_ratio - 0.05) <= 1e-12);
  for (double level : {0.001, 0.2}) {
    BenchConfig cfg;
    cfg.noise_level = level;
    CHECK(std::abs(build_problem(cfg).noise_ratio - level) <= 1e-12 * std::max(1.0, level));
  }
}

TEST_CASE("build_problem: exact data is the blur of the true signal") {
  const auto p = build_problem(BenchConfig{});
  const VectorXd recomputed = oracle::gaussian_toeplitz(3.0, 128) * p.x_true;
  CHECK((p.b_true - recomputed).norm() <= 1e-14 * recomputed.norm());
  CHECK(p.model.m == 128);
  CHECK(p.model.n == 128);
  CHECK(p.model.r == 1);
  CHECK(p.L.rows() == 127);
  CHECK(p.L.cols() == 128);
  CHECK(p.lambda == 0.0379);
}

TEST_CASE("build_problem: identical configs give bit-identical instances") {
  const auto a = build_problem(BenchConfig{});
  const auto b = build_problem(BenchConfig{});
  CHECK(a.b == b.b);
  CHECK(a.b_true == b.b_true);
  CHECK(a.x_true == b.x_true);
  CHECK(a.L.to_dense() == b.L.to_dense());
  BenchConfig other;
  other.seed = 7;
  CHECK(build_problem(other).b != a.b);
}

TEST_CASE("build_problem: regularization removes the common null space at the true width") {
  const auto p = build_problem(BenchConfig{});
  const MatrixXd S = stack(p.model.A(VectorXd::Constant(1, 3.0)), p.L, p.lambda).to_dense();
  CHECK(oracle::singular_values(S).minCoeff() > 0.0);
  CHECK(oracle::cond(S) < 1e8);
}

TEST_CASE("build_problem: the blur at the true width is severely ill-conditioned") {
  CHECK(oracle::cond(oracle::gaussian_toeplitz(3.0, 128)) >= 1e12);
}

TEST_CASE("build_problem: invalid configuration names the field") {
  const auto field_of = [](BenchConfig cfg) {
    try {
      build_problem(cfg);
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string();
  };
  BenchConfig c;
  c.n = 4;
  CHECK(field_of(c) == "problem.n");
  c = {};
  c.sigma_true = 0.0;
  CHECK(field_of(c) == "problem.sigma_true");
  c = {};
  c.noise_level = -0.1;
  CHECK(field_of(c) == "problem.noise_level");
  c = {};
  c.lambda = 0.0;
  CHECK(field_of(c) == "problem.lambda");
  c = {};
  c.tau = 0.0;
  CHECK(field_of(c) == "problem.tau");
  c = {};
  c.y0 = {};
  CHECK(field_of(c) == "problem.y0");
  c = {};
  c.y0 = {2.0, -1.0};
  CHECK(field_of(c) == "problem.y0");
  c = {};
  c.signal = "square";
  CHECK(field_of(c) == "problem.signal");
  c = {};
  c.model = "moffat";
  CHECK(field_of(c) == "problem.model");
}

TEST_CASE("default_signal: zero boundaries and range") {
  for (const char* shape : {"piecewise", "gaussian-bumps"})
    for (Index n : {8, 16, 128, 301}) {
      const VectorXd x = default_signal(n, shape);
      CHECK(x.size() == n);
      CHECK(x(0) == 0.0);
      CHECK(x(n - 1) == 0.0);
      CHECK(x.minCoeff() >= 0.0);
      CHECK(x.maxCoeff() <= 1.0);
      CHECK(x.maxCoeff() > 0.0);
    }
}

TEST_CASE("default_signal: piecewise differences exercise both weight regimes") {
  const VectorXd dx = oracle::difference(128) * default_signal(128, "piecewise");
  CHECK(dx.cwiseAbs().minCoeff() == 0.0);
  CHECK(dx.cwiseAbs().maxCoeff() >= 0.05);
}

TEST_CASE("default_signal: piecewise, n = 16 is frozen") {
  VectorXd expected(16);
  expected << 0, 0, 0.59999999999999998, 0.59999999999999998, 0.59999999999999998, 0, 0, 0.33333333333333326,
      0.66666666666666652, 0, 0, 0.1999999999999999, 0.80000000000000004, 0.19999999999999968, 0, 0;
  CHECK(default_signal(16, "piecewise") == expected);
}

TEST_CASE("default_signal: invalid input") {
  CHECK_THROWS_AS(default_signal(128, "square"), ConfigError);
  CHECK_THROWS_AS(default_signal(7, "piecewise"), ConfigError);
}

TEST_CASE("build_regularizer: a constant signal gives a scaled difference operator") {
  const double tau = 1e-4;
  const MatrixXd L = build_regularizer(VectorXd::Constant(10, 0.3), tau).to_dense();
  CHECK((L - oracle::difference(10) / std::sqrt(tau)).cwiseAbs().maxCoeff() <= 1e-12 / std::sqrt(tau));
}

TEST_CASE("build_regularizer: a single unit jump has unit weighted energy") {
  VectorXd x = VectorXd::Zero(20);
  x.tail(10).setOnes();
  const double tau = 1e-8;
  const double energy = build_regularizer(x, tau).apply(x).squaredNorm();
  CHECK(std::abs(energy - 1.0) <= 2.0 * tau);
}

TEST_CASE("build_regularizer: weighted energy approximates the total variation") {
  const auto p = build_problem(BenchConfig{});
  const double energy = p.L.apply(p.x_true).squaredNorm();
  const VectorXd dx = oracle::difference(128) * p.x_true;
  const double tv = dx.cwiseAbs().sum();
  CHECK(energy >= 0.5 * tv);
  CHECK(energy <= tv);
  double direct = 0.0;
  for (Index i = 0; i < dx.size(); ++i) direct += dx(i) * dx(i) / (std::abs(dx(i)) + 1e-8);
  CHECK(std::abs(energy - direct) <= 1e-12 * direct);
}

TEST_CASE("build_regularizer: tau must be positive") {
  CHECK_THROWS_AS(build_regularizer(VectorXd::Zero(10), 0.0), InvalidArgument);
}

TEST_CASE("models: constant and scaled-derivative wrappers") {
  const auto A = gaussian_toeplitz(2.0, 10);
  const auto c = constant_model(A, 2);
  CHECK(c.r == 2);
  const VectorXd y = VectorXd::Constant(2, 1.0);
  CHECK(c.A(y).to_dense() == A.to_dense());
  CHECK(c.dA(y, 1).to_dense().isZero(0.0));

  const auto g = gaussian_blur_model(10);
  CHECK_FALSE(g.feasible(VectorXd::Constant(1, 0.0)));
  CHECK_FALSE(g.feasible(VectorXd::Constant(1, std::nan(""))));
  CHECK(g.feasible(VectorXd::Constant(1, 0.5)));
  const auto s = scaled_derivative_model(g, 2.0);
  const VectorXd y1 = VectorXd::Constant(1, 1.5);
  CHECK(s.dA(y1, 0).to_dense() == 2.0 * g.dA(y1, 0).to_dense());
  CHECK(s.A(y1).to_dense() == g.A(y1).to_dense());
}

TEST_CASE("reduced objective: the grid minimizer on [2, 4] lies near the true width") {
  const auto p = build_problem(BenchConfig{});
  const auto t0 = std::chrono::steady_clock::now();
  const auto best = grid_minimize(p, 2.0, 4.0, 0.01);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  MESSAGE("grid of 201 points took " << seconds << " s, minimizer " << best.y);
  CHECK(std::abs(best.y - 3.0) <= 0.2);
  CHECK(best.value == reduced_objective(p, VectorXd::Constant(1, best.y)));
  CHECK(best.value <= reduced_objective(p, VectorXd::Constant(1, 2.0)));
  CHECK(best.value <= reduced_objective(p, VectorXd::Constant(1, 4.0)));
  CHECK_THROWS_AS(grid_minimize(p, 2.0, 4.0, 0.0), InvalidArgument);
  CHECK_THROWS_AS(grid_minimize(p, 4.0, 2.0, 0.1), InvalidArgument);
}

TEST_CASE("relative_error") {
  VectorXd a(2), b(2);
  a << 1, 1;
  b << 1, 0;
  CHECK(relative_error(a, b) == 1.0);
  CHECK(relative_error(b, b) == 0.0);
}
