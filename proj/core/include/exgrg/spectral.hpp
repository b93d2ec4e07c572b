#pragma once

#include <cstddef>
#include <vector>

#include "exgrg/graph.hpp"
#include "exgrg/matrix.hpp"
#include "exgrg/sparse.hpp"

namespace exgrg {

/// Eigenvalues at or below this magnitude count as zero modes.
inline constexpr double kZeroEigenvalueThreshold = 1e-8;

/// Full spectrum of a symmetric matrix.
struct SpectralDecomposition {
  std::vector<double> eigenvalues;  // ascending
  Matrix eigenvectors;              // column j pairs with eigenvalues[j]
};

/// D - A, or I - D^-1/2 A D^-1/2 when `normalized` (isolated nodes get an identity row).
Matrix laplacian(const SparseMatrix& adjacency, bool normalized);
Matrix laplacian(const SourceGraph& g, bool normalized);

/// Dense symmetric eigensolver. Columns are sign-canonicalized so the
/// largest-magnitude entry is positive (ties go to the lowest row index).
/// Throws NumericError on non-convergence or when the residual bound
/// ||A v - lambda v|| <= 1e-8 max(1, |lambda|) or orthonormality fails.
SpectralDecomposition eigendecompose_symmetric(const Matrix& a);

/// Flips v so its largest-magnitude entry is positive; ties go to the lowest index.
void canonicalize_sign(std::span<double> v);

/// Largest ||A v_j - lambda_j v_j||_2 / max(1, |lambda_j|) over all pairs.
double max_eigen_residual(const Matrix& a, const SpectralDecomposition& d);
/// Largest |V^T V - I| entry.
double max_orthonormality_error(const SpectralDecomposition& d);

}  // namespace exgrg
