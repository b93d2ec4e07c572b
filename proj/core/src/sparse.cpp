#include "exgrg/sparse.hpp"

#include <algorithm>
#include <sstream>

#include "exgrg/error.hpp"

namespace exgrg {

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                         std::vector<Triplet> triplets, DuplicatePolicy policy) {
  for (const auto& t : triplets) {
    if (t.row >= rows || t.col >= cols) {
      std::ostringstream msg;
      msg << "SparseMatrix: entry (" << t.row << "," << t.col << ") outside " << rows << "x"
          << cols;
      throw ShapeError(msg.str());
    }
  }
  std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });

  SparseMatrix m(rows, cols);
  m.col_idx_.reserve(triplets.size());
  m.values_.reserve(triplets.size());
  std::size_t i = 0;
  while (i < triplets.size()) {
    std::size_t j = i;
    double v = triplets[i].value;
    while (++j < triplets.size() && triplets[j].row == triplets[i].row &&
           triplets[j].col == triplets[i].col) {
      switch (policy) {
        case DuplicatePolicy::kSum: v += triplets[j].value; break;
        case DuplicatePolicy::kKeepFirst: break;
        case DuplicatePolicy::kMax: v = std::max(v, triplets[j].value); break;
      }
    }
    m.col_idx_.push_back(triplets[i].col);
    m.values_.push_back(v);
    ++m.row_ptr_[triplets[i].row + 1];
    i = j;
  }
  for (std::size_t r = 0; r < rows; ++r) m.row_ptr_[r + 1] += m.row_ptr_[r];
  return m;
}

SparseMatrix SparseMatrix::from_dense(const Matrix& dense, bool keep_zeros) {
  SparseMatrix m(dense.rows(), dense.cols());
  for (std::size_t r = 0; r < dense.rows(); ++r) {
    for (std::size_t c = 0; c < dense.cols(); ++c) {
      const double v = dense(r, c);
      if (v == 0.0 && !keep_zeros) continue;
      m.col_idx_.push_back(c);
      m.values_.push_back(v);
    }
    m.row_ptr_[r + 1] = m.col_idx_.size();
  }
  return m;
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  SparseMatrix m(n, n);
  m.col_idx_.resize(n);
  m.values_.assign(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    m.col_idx_[i] = i;
    m.row_ptr_[i + 1] = i + 1;
  }
  return m;
}

double SparseMatrix::at(std::size_t r, std::size_t c) const noexcept {
  const auto cols = row_cols(r);
  const auto it = std::lower_bound(cols.begin(), cols.end(), c);
  if (it == cols.end() || *it != c) return 0.0;
  return values_[row_ptr_[r] + static_cast<std::size_t>(it - cols.begin())];
}

bool SparseMatrix::contains(std::size_t r, std::size_t c) const noexcept {
  const auto cols = row_cols(r);
  return std::binary_search(cols.begin(), cols.end(), c);
}

std::vector<Triplet> SparseMatrix::triplets() const {
  std::vector<Triplet> out;
  out.reserve(nnz());
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p)
      out.push_back({r, col_idx_[p], values_[p]});
  return out;
}

Matrix SparseMatrix::to_dense() const {
  Matrix d(rows_, cols_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) d(r, col_idx_[p]) = values_[p];
  return d;
}

SparseMatrix SparseMatrix::transposed() const {
  SparseMatrix t(cols_, rows_);
  t.col_idx_.resize(nnz());
  t.values_.resize(nnz());
  for (std::size_t c : col_idx_) ++t.row_ptr_[c + 1];
  for (std::size_t c = 0; c < cols_; ++c) t.row_ptr_[c + 1] += t.row_ptr_[c];
  std::vector<std::size_t> cursor(t.row_ptr_.begin(), t.row_ptr_.end() - 1);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
      const std::size_t dst = cursor[col_idx_[p]]++;
      t.col_idx_[dst] = r;
      t.values_[dst] = values_[p];
    }
  }
  return t;
}

Matrix SparseMatrix::multiply(const Matrix& dense) const {
  if (dense.rows() != cols_) throw ShapeError("SparseMatrix::multiply: inner dimension mismatch");
  const std::size_t n = dense.cols();
  Matrix out(rows_, n);
  for (std::size_t r = 0; r < rows_; ++r) {
    double* dst = out.data() + r * n;
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
      const double s = values_[p];
      const double* src = dense.data() + col_idx_[p] * n;
      for (std::size_t j = 0; j < n; ++j) dst[j] += s * src[j];
    }
  }
  return out;
}

Matrix SparseMatrix::transpose_multiply(const Matrix& dense) const {
  if (dense.rows() != rows_)
    throw ShapeError("SparseMatrix::transpose_multiply: inner dimension mismatch");
  const std::size_t n = dense.cols();
  Matrix out(cols_, n);
  for (std::size_t r = 0; r < rows_; ++r) {
    const double* src = dense.data() + r * n;
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
      const double s = values_[p];
      double* dst = out.data() + col_idx_[p] * n;
      for (std::size_t j = 0; j < n; ++j) dst[j] += s * src[j];
    }
  }
  return out;
}

bool operator==(const SparseMatrix& a, const SparseMatrix& b) noexcept {
  return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.row_ptr_ == b.row_ptr_ &&
         a.col_idx_ == b.col_idx_ && a.values_ == b.values_;
}

SparseMatrix hadamard(const SparseMatrix& a, const SparseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError("hadamard: shape mismatch");
  std::vector<Triplet> out;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto ac = a.row_cols(r);
    const auto av = a.row_values(r);
    const auto bc = b.row_cols(r);
    const auto bv = b.row_values(r);
    std::size_t i = 0, j = 0;
    while (i < ac.size() && j < bc.size()) {
      if (ac[i] < bc[j]) {
        ++i;
      } else if (bc[j] < ac[i]) {
        ++j;
      } else {
        const double v = av[i] * bv[j];
        if (v != 0.0) out.push_back({r, ac[i], v});
        ++i;
        ++j;
      }
    }
  }
  return SparseMatrix::from_triplets(a.rows(), a.cols(), std::move(out));
}

SparseMatrix block_diagonal(const SparseMatrix& a, const SparseMatrix& b) {
  std::vector<Triplet> t = a.triplets();
  for (const auto& e : b.triplets()) t.push_back({e.row + a.rows(), e.col + a.cols(), e.value});
  return SparseMatrix::from_triplets(a.rows() + b.rows(), a.cols() + b.cols(), std::move(t));
}

}  // namespace exgrg
