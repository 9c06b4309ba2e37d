#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <variant>
#include <vector>

#include "rmbound/error.hpp"

namespace rmb {

using Index = Eigen::Index;
using DenseMatrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct Entry {
  Index row;
  Index col;
  double value;
};

// Patterns with fewer than this fraction of nonzeros are stored sparse.
inline constexpr double kSparseDensityThreshold = 0.05;

/// Real matrix held either densely or as a row-major CSR array.
///
/// Explicit zeros are never stored in the sparse layout, so the stored
/// pattern of a sparse matrix is its support.
class Matrix {
 public:
  Matrix() : storage_(DenseMatrix(0, 0)) {}
  explicit Matrix(DenseMatrix m) : storage_(std::move(m)) {}
  explicit Matrix(SparseMatrix m) : storage_(std::move(m)) {
    auto& s = std::get<SparseMatrix>(storage_);
    s.prune([](Index, Index, double v) { return v != 0.0; });
    s.makeCompressed();
  }

  static Matrix zeros(Index rows, Index cols) {
    SparseMatrix s(rows, cols);
    return Matrix(std::move(s));
  }

  /// Builds from an entry list; picks storage by density unless forced.
  /// Duplicate coordinates are an error. Zero values are dropped.
  static Matrix from_entries(Index rows, Index cols, std::vector<Entry> entries,
                             int force_sparse = -1) {
    if (rows < 1 || cols < 1) throw ConstructionError("matrix dimensions must be >= 1");
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    std::size_t nnz = 0;
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const auto& e = entries[k];
      if (e.row < 0 || e.row >= rows || e.col < 0 || e.col >= cols)
        throw ConstructionError("entry index out of range");
      if (!std::isfinite(e.value)) throw DataError("matrix entries must be finite");
      if (k > 0 && entries[k - 1].row == e.row && entries[k - 1].col == e.col)
        throw ConstructionError("duplicate entry coordinate");
      if (e.value != 0.0) ++nnz;
    }
    const double density =
        static_cast<double>(nnz) / (static_cast<double>(rows) * static_cast<double>(cols));
    const bool sparse = force_sparse < 0 ? density < kSparseDensityThreshold : force_sparse == 1;
    if (sparse) {
      std::vector<Eigen::Triplet<double>> t;
      t.reserve(nnz);
      for (const auto& e : entries)
        if (e.value != 0.0) t.emplace_back(e.row, e.col, e.value);
      SparseMatrix s(rows, cols);
      s.setFromTriplets(t.begin(), t.end());
      return Matrix(std::move(s));
    }
    DenseMatrix d = DenseMatrix::Zero(rows, cols);
    for (const auto& e : entries) d(e.row, e.col) = e.value;
    return Matrix(std::move(d));
  }

  Index rows() const {
    return std::visit([](const auto& m) { return Index(m.rows()); }, storage_);
  }
  Index cols() const {
    return std::visit([](const auto& m) { return Index(m.cols()); }, storage_);
  }
  bool is_sparse() const { return std::holds_alternative<SparseMatrix>(storage_); }

  const DenseMatrix& dense() const { return std::get<DenseMatrix>(storage_); }
  const SparseMatrix& sparse() const { return std::get<SparseMatrix>(storage_); }

  double operator()(Index i, Index j) const {
    if (is_sparse()) return sparse().coeff(i, j);
    return dense()(i, j);
  }

  /// Visits every nonzero entry in row-major order as f(i, j, value).
  template <typename F>
  void for_each_nonzero(F&& f) const {
    if (is_sparse()) {
      const auto& s = sparse();
      for (Index i = 0; i < s.outerSize(); ++i)
        for (SparseMatrix::InnerIterator it(s, i); it; ++it)
          if (it.value() != 0.0) f(i, Index(it.col()), it.value());
    } else {
      const auto& d = dense();
      for (Index i = 0; i < d.rows(); ++i)
        for (Index j = 0; j < d.cols(); ++j)
          if (d(i, j) != 0.0) f(i, j, d(i, j));
    }
  }

  std::size_t nonzeros() const {
    std::size_t count = 0;
    for_each_nonzero([&](Index, Index, double) { ++count; });
    return count;
  }

  Vector multiply(const Vector& x) const {
    if (is_sparse()) return sparse() * x;
    return dense() * x;
  }
  Vector multiply_transpose(const Vector& x) const {
    if (is_sparse()) return sparse().transpose() * x;
    return dense().transpose() * x;
  }

  DenseMatrix to_dense() const {
    if (is_sparse()) return DenseMatrix(sparse());
    return dense();
  }

  bool all_finite() const {
    bool ok = true;
    for_each_nonzero([&](Index, Index, double v) { ok = ok && std::isfinite(v); });
    return ok;
  }

  /// max |M_ij - M_ji| over the support; +inf for non-square input.
  double asymmetry() const {
    if (rows() != cols()) return std::numeric_limits<double>::infinity();
    double worst = 0.0;
    for_each_nonzero([&](Index i, Index j, double v) {
      worst = std::max(worst, std::abs(v - (*this)(j, i)));
    });
    return worst;
  }

  /// Entrywise map that keeps the storage layout.
  template <typename F>
  Matrix map(F&& f) const {
    if (is_sparse()) {
      SparseMatrix s = sparse();
      for (Index k = 0; k < s.nonZeros(); ++k) s.valuePtr()[k] = f(s.valuePtr()[k]);
      return Matrix(std::move(s));
    }
    DenseMatrix d = dense().unaryExpr([&](double v) { return v == 0.0 ? 0.0 : f(v); });
    return Matrix(std::move(d));
  }

 private:
  std::variant<DenseMatrix, SparseMatrix> storage_;
};

}  // namespace rmb
