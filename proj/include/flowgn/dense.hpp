#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "error.hpp"

namespace flowgn {

/// Row-major so node rows are contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Non-owning view of the layer-0 input, dense or sparse. Bag-of-words
/// features are mostly zeros, and the first layer dominates the cost.
class Features {
public:
  Features() = default;
  Features(const Matrix& m) : dense_(&m) {}
  Features(const SparseMatrix& s) : sparse_(&s) {}

  Eigen::Index rows() const { return dense_ ? dense_->rows() : sparse_->rows(); }
  Eigen::Index cols() const { return dense_ ? dense_->cols() : sparse_->cols(); }
  bool is_sparse() const noexcept { return sparse_ != nullptr; }
  bool valid() const noexcept { return dense_ || sparse_; }

  /// features · w
  template <typename Derived>
  Matrix times(const Eigen::MatrixBase<Derived>& w) const {
    if (dense_) return *dense_ * w;
    return *sparse_ * w;
  }
  /// featuresᵀ · g
  Matrix transpose_times(const Matrix& g) const {
    if (dense_) return dense_->transpose() * g;
    return sparse_->transpose() * g;
  }

private:
  const Matrix* dense_ = nullptr;
  const SparseMatrix* sparse_ = nullptr;
};

/// Fraction of nonzero entries.
inline double density(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return static_cast<double>((m.array() != 0.0).count()) / static_cast<double>(m.size());
}

} // namespace flowgn
