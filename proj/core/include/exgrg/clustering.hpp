#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "exgrg/autodiff.hpp"
#include "exgrg/config.hpp"
#include "exgrg/graph.hpp"
#include "exgrg/matrix.hpp"

namespace exgrg {

/// K x D prototypes with unit-norm rows drawn uniformly on the sphere.
Matrix init_prototypes(std::size_t k, std::size_t dim, Rng& rng);

/// Rescales every row to unit L2 norm in place.
void renormalize_prototypes(Matrix& c);

/// P = row_softmax(normalize(H) C^T / tau), on-tape in H and C.
ad::Var assign_probabilities(const ad::Var& h, const ad::Var& c, double tau);

/// Equipartitioned codes Q (N x K) from scores normalize(H) C^T / epsilon.
///
/// Log-domain Sinkhorn-Knopp: each round scales columns to 1/K then rows to
/// 1/N, so row marginals are exact after the final round. Throws NumericError
/// when a row underflows.
Matrix sinkhorn_codes(const Matrix& h, const Matrix& c, double epsilon, std::size_t iterations);

/// Same iteration on precomputed scores (N x K), without normalization.
Matrix sinkhorn_from_scores(const Matrix& scores, double epsilon, std::size_t iterations);

/// Pairs (i, j) of S_O: self pairs and/or augmentation pairs.
std::vector<std::pair<std::size_t, std::size_t>> ot_pairs(
    std::size_t n, std::span<const std::pair<std::size_t, std::size_t>> augment_pairs,
    OtPairs mode);

/// L_O = (1/|S_O|) sum_{(i,j)} -sum_k Qn_{i,k} log P_{j,k}, where Qn is Q with
/// rows rescaled to sum to 1. Q is a constant target.
ad::Var ot_alignment_loss(const ad::Var& p, const Matrix& q,
                          std::span<const std::pair<std::size_t, std::size_t>> pairs);

}  // namespace exgrg
