#include "exgrg/spectral.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "exgrg/error.hpp"

namespace exgrg {

namespace {

using EigenMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const EigenMat> as_eigen(const Matrix& m) {
  return Eigen::Map<const EigenMat>(m.data(), static_cast<Eigen::Index>(m.rows()),
                                    static_cast<Eigen::Index>(m.cols()));
}

constexpr double kResidualBound = 1e-8;

}  // namespace

Matrix laplacian(const SparseMatrix& adjacency, bool normalized) {
  const std::size_t n = adjacency.rows();
  if (adjacency.cols() != n) throw ShapeError("laplacian: adjacency is not square");
  std::vector<double> degree(n, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (double v : adjacency.row_values(r)) degree[r] += v;
  Matrix l(n, n);
  if (!normalized) {
    for (std::size_t r = 0; r < n; ++r) {
      l(r, r) = degree[r];
      const auto cols = adjacency.row_cols(r);
      const auto vals = adjacency.row_values(r);
      for (std::size_t p = 0; p < cols.size(); ++p) l(r, cols[p]) -= vals[p];
    }
    return l;
  }
  std::vector<double> inv_sqrt(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    if (degree[i] > 0.0) inv_sqrt[i] = 1.0 / std::sqrt(degree[i]);
  for (std::size_t r = 0; r < n; ++r) {
    l(r, r) = 1.0;
    const auto cols = adjacency.row_cols(r);
    const auto vals = adjacency.row_values(r);
    for (std::size_t p = 0; p < cols.size(); ++p)
      l(r, cols[p]) -= vals[p] * inv_sqrt[r] * inv_sqrt[cols[p]];
  }
  return l;
}

Matrix laplacian(const SourceGraph& g, bool normalized) {
  return laplacian(g.adjacency(), normalized);
}

void canonicalize_sign(std::span<double> v) {
  std::size_t best = 0;
  double best_abs = -1.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]);
    if (a > best_abs) {
      best_abs = a;
      best = i;
    }
  }
  if (!v.empty() && v[best] < 0.0)
    for (double& x : v) x = -x;
}

SpectralDecomposition eigendecompose_symmetric(const Matrix& a) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw ShapeError("eigendecompose_symmetric: matrix is not square");
  SpectralDecomposition d;
  if (n == 0) return d;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (a(i, j) != a(j, i))
        throw ShapeError("eigendecompose_symmetric: matrix is not symmetric at (" +
                         std::to_string(i) + ", " + std::to_string(j) + ")");

  const Eigen::MatrixXd dense = as_eigen(a);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dense, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) {
    const Eigen::MatrixXd& v = solver.eigenvectors();
    const Eigen::MatrixXd t = v.transpose() * dense * v;
    const double off = (t - Eigen::MatrixXd(t.diagonal().asDiagonal())).cwiseAbs().maxCoeff();
    throw NumericError("eigendecompose_symmetric: solver did not converge (off-diagonal residual " +
                       std::to_string(off) + ")");
  }
  d.eigenvalues.assign(solver.eigenvalues().data(), solver.eigenvalues().data() + n);
  d.eigenvectors = Matrix(n, n);
  std::vector<double> column(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i)
      column[i] = solver.eigenvectors()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    canonicalize_sign(column);
    for (std::size_t i = 0; i < n; ++i) d.eigenvectors(i, j) = column[i];
  }

  const double residual = max_eigen_residual(a, d);
  if (!(residual <= kResidualBound))
    throw NumericError("eigendecompose_symmetric: eigenpair residual " + std::to_string(residual) +
                       " exceeds 1e-8");
  const double ortho = max_orthonormality_error(d);
  if (!(ortho <= kResidualBound))
    throw NumericError("eigendecompose_symmetric: orthonormality error " + std::to_string(ortho) +
                       " exceeds 1e-8");
  return d;
}

double max_eigen_residual(const Matrix& a, const SpectralDecomposition& d) {
  const auto am = as_eigen(a);
  const auto v = as_eigen(d.eigenvectors);
  const EigenMat av = am * v;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    const double lambda = d.eigenvalues[static_cast<std::size_t>(j)];
    const double r = (av.col(j) - lambda * v.col(j)).norm() / std::max(1.0, std::abs(lambda));
    worst = std::max(worst, r);
  }
  return worst;
}

double max_orthonormality_error(const SpectralDecomposition& d) {
  const auto v = as_eigen(d.eigenvectors);
  const Eigen::MatrixXd gram = v.transpose() * v;
  return (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
}

}  // namespace exgrg
