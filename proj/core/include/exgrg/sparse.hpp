#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "exgrg/matrix.hpp"

namespace exgrg {

struct Triplet {
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;
};

enum class DuplicatePolicy { kSum, kKeepFirst, kMax };

/// Compressed sparse row matrix. Column indices are strictly increasing
/// within each row.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols);

  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                    std::vector<Triplet> triplets,
                                    DuplicatePolicy policy = DuplicatePolicy::kSum);
  static SparseMatrix from_dense(const Matrix& dense, bool keep_zeros = false);
  static SparseMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return col_idx_.size(); }

  std::span<const std::size_t> row_ptr() const noexcept { return row_ptr_; }
  std::span<const std::size_t> col_idx() const noexcept { return col_idx_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> mutable_values() noexcept { return values_; }

  std::span<const std::size_t> row_cols(std::size_t r) const noexcept {
    return {col_idx_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }
  std::span<const double> row_values(std::size_t r) const noexcept {
    return {values_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }

  /// Value at (r, c), zero when not stored.
  double at(std::size_t r, std::size_t c) const noexcept;
  bool contains(std::size_t r, std::size_t c) const noexcept;

  std::vector<Triplet> triplets() const;
  Matrix to_dense() const;
  SparseMatrix transposed() const;

  /// this * dense
  Matrix multiply(const Matrix& dense) const;
  /// this^T * dense
  Matrix transpose_multiply(const Matrix& dense) const;

  friend bool operator==(const SparseMatrix& a, const SparseMatrix& b) noexcept;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> col_idx_;
  std::vector<double> values_;
};

/// Elementwise product; the support is the intersection of supports.
SparseMatrix hadamard(const SparseMatrix& a, const SparseMatrix& b);

/// Block-diagonal matrix diag(a, b).
SparseMatrix block_diagonal(const SparseMatrix& a, const SparseMatrix& b);

}  // namespace exgrg
