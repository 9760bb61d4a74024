#pragma once

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <sstream>

#include "varpro/linear_operator.hpp"

namespace varpro {

/// Cholesky factorization of S^T S for a stacked operator S = [A; lambda L].
///
/// Gives the exact inner solution and the pseudoinverse / projector actions
/// that appear in the variable-projection Jacobian. Immutable once built.
template <typename Scalar>
class DirectFactorization {
 public:
  using Vector = VectorX<Scalar>;
  using Matrix = MatrixX<Scalar>;

  explicit DirectFactorization(const StackedOperator<Scalar>& op) : op_(op), dense_(op.to_dense()) {
    const Matrix normal = dense_.transpose() * dense_;
    llt_.compute(normal);
    const Scalar max_diag = normal.diagonal().cwiseAbs().maxCoeff();
    // A pivot below this is indistinguishable from zero at working precision.
    const Scalar floor = Scalar(normal.rows()) * std::numeric_limits<Scalar>::epsilon() * max_diag;
    Scalar smallest = std::numeric_limits<Scalar>::infinity();
    if (llt_.info() == Eigen::Success) {
      const Matrix& l = llt_.matrixLLT();
      for (Index i = 0; i < l.rows(); ++i) smallest = std::min(smallest, l(i, i) * l(i, i));
    } else {
      Eigen::LDLT<Matrix> ldlt(normal);
      smallest = ldlt.vectorD().minCoeff();
    }
    if (llt_.info() != Eigen::Success || !(smallest > floor)) {
      std::ostringstream msg;
      msg << "normal equations are not positive definite (smallest pivot " << smallest << ")";
      throw SingularSystemError(msg.str(), static_cast<double>(smallest));
    }
  }

  const StackedOperator<Scalar>& op() const noexcept { return op_; }
  const Matrix& dense() const noexcept { return dense_; }

  /// (S^T S)^{-1} S^T [b; 0], i.e. the minimizer of ||A x - b||^2 + lambda^2 ||L x||^2.
  Vector solve_data(const Vector& b) const {
    if (b.size() != op_.top_rows()) throw InvalidArgument("direct_solve: data length mismatch");
    return llt_.solve(Vector(dense_.topRows(op_.top_rows()).transpose() * b));
  }

  /// (S^T S)^{-1} v.
  Vector solve_normal(const Vector& v) const {
    if (v.size() != op_.cols()) throw InvalidArgument("solve_normal: length mismatch");
    return llt_.solve(v);
  }

 private:
  StackedOperator<Scalar> op_;
  Matrix dense_;
  Eigen::LLT<Matrix> llt_;
};

/// Exact inner solution by Cholesky on the normal equations.
template <typename Scalar>
VectorX<Scalar> direct_solve(const StackedOperator<Scalar>& op, const VectorX<Scalar>& b) {
  return DirectFactorization<Scalar>(op).solve_data(b);
}

/// S^dagger z = (S^T S)^{-1} S^T z.
template <typename Scalar>
VectorX<Scalar> apply_pinv(const DirectFactorization<Scalar>& fact, const VectorX<Scalar>& z) {
  if (z.size() != fact.op().rows()) throw InvalidArgument("apply_pinv: length mismatch");
  return fact.solve_normal(fact.dense().transpose() * z);
}

/// (S^dagger)^T w = S (S^T S)^{-1} w.
template <typename Scalar>
VectorX<Scalar> apply_pinv_transpose(const DirectFactorization<Scalar>& fact, const VectorX<Scalar>& w) {
  if (w.size() != fact.op().cols()) throw InvalidArgument("apply_pinv_transpose: length mismatch");
  return fact.dense() * fact.solve_normal(w);
}

/// (I - S S^dagger) z.
template <typename Scalar>
VectorX<Scalar> apply_projector_perp(const DirectFactorization<Scalar>& fact, const VectorX<Scalar>& z) {
  return z - fact.dense() * apply_pinv(fact, z);
}

template <typename Scalar>
VectorX<Scalar> singular_values(const MatrixX<Scalar>& m) {
  return Eigen::JacobiSVD<MatrixX<Scalar>>(m).singularValues();
}

/// sigma_max / sigma_min of a dense matrix with full column rank.
template <typename Scalar>
Scalar condition_number(const MatrixX<Scalar>& m) {
  if (m.cols() == 0 || m.rows() < m.cols()) throw RankDeficiency("condition_number: fewer rows than columns");
  const VectorX<Scalar> sv = singular_values(m);
  const Scalar smin = sv(sv.size() - 1);
  const Scalar cutoff = std::numeric_limits<Scalar>::epsilon() * static_cast<Scalar>(m.rows()) * sv(0);
  if (!(smin > cutoff)) throw RankDeficiency("condition_number: operator is rank deficient");
  return sv(0) / smin;
}

template <typename Scalar>
Scalar condition_number(const StackedOperator<Scalar>& op) {
  return condition_number<Scalar>(op.to_dense());
}

}  // namespace varpro
