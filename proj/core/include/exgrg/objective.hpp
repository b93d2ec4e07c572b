#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "exgrg/autodiff.hpp"
#include "exgrg/clustering.hpp"
#include "exgrg/config.hpp"
#include "exgrg/matrix.hpp"
#include "exgrg/sparse.hpp"

namespace exgrg {

using IndexPair = std::pair<std::size_t, std::size_t>;

/// sum_k max(0, 1 - sqrt(Cov(Z)_kk + 1e-4)), covariance with 1/(N-1).
ad::Var variance_loss(const ad::Var& z);
/// sum_{k != j} Cov(Z)_kj^2.
ad::Var covariance_loss(const ad::Var& z);
/// sum over the listed ordered pairs of w_p ||z_i - z_j||^2; `weights` is 1 x pairs.size().
ad::Var invariance_loss(const ad::Var& z, std::span<const IndexPair> pairs, const ad::Var& weights);
/// Same with a constant relation matrix.
ad::Var invariance_loss(const ad::Var& z, const SparseMatrix& g);
/// -sum of squared relation weights.
ad::Var relation_regularizer(const ad::Var& weights);

/// Per-term values of one L_ETE evaluation.
struct LossReport {
  double variance = 0.0;
  double covariance = 0.0;
  double invariance = 0.0;
  double alignment = 0.0;
  double regularizer = 0.0;
  double total = 0.0;
};

/// On-tape inputs to L_ETE for one batch.
struct LossInputs {
  ad::Var z;                        // N x D_Z
  std::span<const IndexPair> pairs;  // support of G
  ad::Var g_weights;                // 1 x pairs.size()
  ad::Var p;                        // N x K assignment probabilities
  const Matrix* q = nullptr;        // N x K Sinkhorn codes (constant)
  std::span<const IndexPair> ot_pairs;
};

struct TotalLoss {
  ad::Var value;
  LossReport report;
};

/// alpha L_V + beta L_C + gamma L_I' + alpha1 L_O + alpha2 L_R. Terms whose
/// weight is zero are evaluated for the report but left off the tape sum.
TotalLoss total_loss(const LossInputs& in, const LossWeights& w);

}  // namespace exgrg
