#pragma once

#include <stdexcept>
#include <string>

namespace varpro {

/// Thrown on bad dimensions, non-positive parameters and similar contract violations.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The normal-equations matrix is not numerically positive definite.
class SingularSystemError : public std::runtime_error {
 public:
  SingularSystemError(const std::string& what, double smallest_pivot)
      : std::runtime_error(what), smallest_pivot_(smallest_pivot) {}
  double smallest_pivot() const noexcept { return smallest_pivot_; }

 private:
  double smallest_pivot_;
};

/// NaN or Inf encountered inside an iterative solver.
class NumericalBreakdown : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An error bound was requested outside the regime epsilon * kappa < 1 where it holds.
class BoundInvalid : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class RankDeficiency : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The Gauss-Newton subproblem has a rank-deficient Jacobian.
class SingularStepError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : std::runtime_error(field.empty() ? what : field + ": " + what), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace varpro
