#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <variant>

#include "varpro/errors.hpp"

namespace varpro {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Index = Eigen::Index;

/// Immutable linear map R^cols -> R^rows with its adjoint.
///
/// Backed by a dense matrix, a sparse matrix, or a pair of user callbacks.
/// Copies share the underlying storage; nothing is mutated after construction,
/// so an operator can be applied concurrently from several threads.
template <typename Scalar>
class LinearOperator {
 public:
  using Vector = VectorX<Scalar>;
  using Matrix = MatrixX<Scalar>;
  using SparseMatrix = Eigen::SparseMatrix<Scalar>;
  using Action = std::function<Vector(const Vector&)>;

  LinearOperator() = default;

  static LinearOperator dense(Matrix m) {
    LinearOperator op;
    op.rows_ = m.rows();
    op.cols_ = m.cols();
    op.impl_ = std::make_shared<const Storage>(std::move(m));
    return op;
  }

  static LinearOperator sparse(SparseMatrix m) {
    m.makeCompressed();
    LinearOperator op;
    op.rows_ = m.rows();
    op.cols_ = m.cols();
    op.impl_ = std::make_shared<const Storage>(std::move(m));
    return op;
  }

  /// The callbacks must be adjoint to each other; this is not checked here.
  static LinearOperator matrix_free(Index rows, Index cols, Action forward, Action adjoint) {
    if (rows < 0 || cols < 1) throw InvalidArgument("matrix_free: invalid dimensions");
    if (!forward || !adjoint) throw InvalidArgument("matrix_free: missing action");
    LinearOperator op;
    op.rows_ = rows;
    op.cols_ = cols;
    op.impl_ = std::make_shared<const Storage>(Callbacks{std::move(forward), std::move(adjoint)});
    return op;
  }

  Index rows() const noexcept { return rows_; }
  Index cols() const noexcept { return cols_; }
  bool empty() const noexcept { return impl_ == nullptr; }

  Vector apply(const Vector& v) const {
    require_size(v, cols_, "apply");
    return std::visit(
        [&](const auto& s) -> Vector {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Callbacks>) {
            return s.forward(v);
          } else {
            return s * v;
          }
        },
        *impl_);
  }

  Vector apply_transpose(const Vector& w) const {
    require_size(w, rows_, "apply_transpose");
    return std::visit(
        [&](const auto& s) -> Vector {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Callbacks>) {
            return s.adjoint(w);
          } else {
            return s.transpose() * w;
          }
        },
        *impl_);
  }

  /// True when the operator stores its entries (dense or sparse).
  bool has_dense() const noexcept {
    return impl_ && !std::holds_alternative<Callbacks>(*impl_);
  }

  /// Dense copy of the operator. Matrix-free operators are probed column by column.
  Matrix to_dense() const {
    if (!impl_) return Matrix(0, 0);
    if (const auto* d = std::get_if<Matrix>(impl_.get())) return *d;
    if (const auto* s = std::get_if<SparseMatrix>(impl_.get())) return Matrix(*s);
    Matrix out(rows_, cols_);
    Vector e = Vector::Zero(cols_);
    for (Index j = 0; j < cols_; ++j) {
      e(j) = Scalar(1);
      out.col(j) = apply(e);
      e(j) = Scalar(0);
    }
    return out;
  }

  friend Vector operator*(const LinearOperator& op, const Vector& v) { return op.apply(v); }

 private:
  struct Callbacks {
    Action forward;
    Action adjoint;
  };
  using Storage = std::variant<Matrix, SparseMatrix, Callbacks>;

  void require_size(const Vector& v, Index expected, const char* what) const {
    if (!impl_) throw InvalidArgument(std::string(what) + ": empty operator");
    if (v.size() != expected) {
      throw InvalidArgument(std::string(what) + ": expected length " + std::to_string(expected) +
                            ", got " + std::to_string(v.size()));
    }
  }

  Index rows_ = 0;
  Index cols_ = 0;
  std::shared_ptr<const Storage> impl_;
};

/// The regularized operator [A; lambda L] acting on R^n into R^(m+q).
template <typename Scalar>
class StackedOperator {
 public:
  using Vector = VectorX<Scalar>;
  using Matrix = MatrixX<Scalar>;

  StackedOperator(LinearOperator<Scalar> top, LinearOperator<Scalar> bottom, Scalar lambda)
      : top_(std::move(top)), bottom_(std::move(bottom)), lambda_(lambda) {
    if (top_.empty() || bottom_.empty()) throw InvalidArgument("stack: empty block");
    if (top_.cols() != bottom_.cols()) {
      throw InvalidArgument("stack: column mismatch (" + std::to_string(top_.cols()) + " vs " +
                            std::to_string(bottom_.cols()) + ")");
    }
    if (!(lambda_ >= Scalar(0))) throw InvalidArgument("stack: lambda must be nonnegative");
  }

  Index rows() const noexcept { return top_.rows() + bottom_.rows(); }
  Index cols() const noexcept { return top_.cols(); }
  Index top_rows() const noexcept { return top_.rows(); }
  Index bottom_rows() const noexcept { return bottom_.rows(); }
  const LinearOperator<Scalar>& top() const noexcept { return top_; }
  const LinearOperator<Scalar>& bottom() const noexcept { return bottom_; }
  Scalar lambda() const noexcept { return lambda_; }

  Vector apply(const Vector& v) const {
    Vector out(rows());
    out.head(top_.rows()) = top_.apply(v);
    out.tail(bottom_.rows()) = lambda_ * bottom_.apply(v);
    return out;
  }

  Vector apply_transpose(const Vector& w) const {
    if (w.size() != rows()) throw InvalidArgument("stack: apply_transpose length mismatch");
    Vector out = top_.apply_transpose(w.head(top_.rows()));
    out += lambda_ * bottom_.apply_transpose(w.tail(bottom_.rows()));
    return out;
  }

  Matrix to_dense() const {
    Matrix out(rows(), cols());
    out.topRows(top_.rows()) = top_.to_dense();
    out.bottomRows(bottom_.rows()) = lambda_ * bottom_.to_dense();
    return out;
  }

  /// [b; 0] with the zero block sized to the regularizer.
  Vector pad_data(const Vector& b) const {
    if (b.size() != top_.rows()) throw InvalidArgument("stack: data length mismatch");
    Vector d = Vector::Zero(rows());
    d.head(top_.rows()) = b;
    return d;
  }

  friend Vector operator*(const StackedOperator& op, const Vector& v) { return op.apply(v); }

 private:
  LinearOperator<Scalar> top_;
  LinearOperator<Scalar> bottom_;
  Scalar lambda_;
};

template <typename Scalar>
StackedOperator<Scalar> stack(LinearOperator<Scalar> top, LinearOperator<Scalar> bottom,
                              Scalar lambda) {
  return StackedOperator<Scalar>(std::move(top), std::move(bottom), lambda);
}

}  // namespace varpro
