#pragma once

#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <vector>

#include "varpro/linear_operator.hpp"

namespace varpro {

/// Dense symmetric Toeplitz matrix with the given first row.
template <typename Derived>
MatrixX<typename Derived::Scalar> symmetric_toeplitz(const Eigen::MatrixBase<Derived>& first_row) {
  const Index n = first_row.size();
  MatrixX<typename Derived::Scalar> out(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) out(i, j) = first_row(i > j ? i - j : j - i);
  return out;
}

namespace detail {

template <typename Scalar>
void check_kernel_args(Scalar sigma, Index n, const char* who) {
  if (!(sigma > Scalar(0)) || !std::isfinite(static_cast<double>(sigma)))
    throw InvalidArgument(std::string(who) + ": sigma must be positive");
  if (n < 2) throw InvalidArgument(std::string(who) + ": n must be at least 2");
}

}  // namespace detail

/// Normalized Gaussian first row c * exp(-j^2 / (2 sigma^2)), j = 0..n-1, summing to one.
template <typename Scalar>
VectorX<Scalar> gaussian_kernel_row(Scalar sigma, Index n) {
  detail::check_kernel_args(sigma, n, "gaussian_kernel_row");
  VectorX<Scalar> g(n);
  for (Index j = 0; j < n; ++j) {
    const Scalar jj = static_cast<Scalar>(j);
    g(j) = std::exp(-jj * jj / (Scalar(2) * sigma * sigma));
  }
  return g / g.sum();
}

/// d/dsigma of gaussian_kernel_row, including the dependence of the normalizer on sigma.
template <typename Scalar>
VectorX<Scalar> gaussian_kernel_row_derivative(Scalar sigma, Index n) {
  detail::check_kernel_args(sigma, n, "gaussian_kernel_row_derivative");
  VectorX<Scalar> g(n), dg(n);
  for (Index j = 0; j < n; ++j) {
    const Scalar jj = static_cast<Scalar>(j);
    g(j) = std::exp(-jj * jj / (Scalar(2) * sigma * sigma));
    dg(j) = g(j) * jj * jj / (sigma * sigma * sigma);
  }
  const Scalar s = g.sum();
  const Scalar ds = dg.sum();
  // quotient rule on g_j / s
  return dg / s - g * (ds / (s * s));
}

/// Symmetric Toeplitz blur A(sigma) with a normalized Gaussian first row.
template <typename Scalar>
LinearOperator<Scalar> gaussian_toeplitz(Scalar sigma, Index n) {
  return LinearOperator<Scalar>::dense(symmetric_toeplitz(gaussian_kernel_row(sigma, n)));
}

/// Analytic dA/dsigma of gaussian_toeplitz.
template <typename Scalar>
LinearOperator<Scalar> gaussian_toeplitz_derivative(Scalar sigma, Index n) {
  return LinearOperator<Scalar>::dense(symmetric_toeplitz(gaussian_kernel_row_derivative(sigma, n)));
}

/// (n-1) x n forward difference: -1 on the diagonal, +1 on the superdiagonal.
template <typename Scalar>
LinearOperator<Scalar> first_difference(Index n) {
  if (n < 2) throw InvalidArgument("first_difference: n must be at least 2");
  std::vector<Eigen::Triplet<Scalar>> entries;
  entries.reserve(static_cast<std::size_t>(2 * (n - 1)));
  for (Index i = 0; i < n - 1; ++i) {
    entries.emplace_back(i, i, Scalar(-1));
    entries.emplace_back(i, i + 1, Scalar(1));
  }
  Eigen::SparseMatrix<Scalar> d(n - 1, n);
  d.setFromTriplets(entries.begin(), entries.end());
  return LinearOperator<Scalar>::sparse(std::move(d));
}

/// Central-difference dA/dy_j for models without an analytic derivative.
/// Step h = max(1e-6, 1e-7 |y_j|).
template <typename Scalar, typename Builder>
LinearOperator<Scalar> finite_difference_derivative(const Builder& operator_at, const VectorX<Scalar>& y,
                                                    Index j) {
  if (j < 0 || j >= y.size()) throw InvalidArgument("finite_difference_derivative: index out of range");
  const Scalar h = std::max(Scalar(1e-6), Scalar(1e-7) * std::abs(y(j)));
  VectorX<Scalar> yp = y, ym = y;
  yp(j) += h;
  ym(j) -= h;
  const MatrixX<Scalar> ap = operator_at(yp).to_dense();
  const MatrixX<Scalar> am = operator_at(ym).to_dense();
  return LinearOperator<Scalar>::dense((ap - am) / (yp(j) - ym(j)));
}

}  // namespace varpro
