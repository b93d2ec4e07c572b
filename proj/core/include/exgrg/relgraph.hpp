#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "exgrg/autodiff.hpp"
#include "exgrg/config.hpp"
#include "exgrg/graph.hpp"
#include "exgrg/matrix.hpp"
#include "exgrg/nn.hpp"
#include "exgrg/sparse.hpp"

namespace exgrg {

enum class RelationKind {
  kAug,
  kKnn,
  kAdj,
  kAdjFiltered,
  kLapPE,
  kRwse,
  kRwseFiltered,
  kSignNet,
  kCluster,
  kAggregate,
};

std::string_view to_string(RelationKind k);
RelationKind parse_relation_kind(std::string_view name);

/// Sparse nonnegative N x N relation matrix over mini-batch positions.
struct RelationGraph {
  RelationKind kind = RelationKind::kAug;
  SparseMatrix weights;

  std::size_t size() const noexcept { return weights.rows(); }
};

/// Which (i, j) pairs may carry a relation. The diagonal never does; with
/// `views` set and `intra` false only pairs from different views qualify.
struct PairFilter {
  std::span<const int> views;
  bool intra = true;

  bool allows(std::size_t i, std::size_t j) const noexcept {
    if (i == j) return false;
    if (!intra && !views.empty() && views[i] == views[j]) return false;
    return true;
  }
};

/// Pairwise similarity of rows with a zero diagonal. Cosine maps zero rows to 0.
Matrix similarity_matrix(const Matrix& rows, SimilarityMetric metric);

/// Per row, the k allowed entries with the largest values (ties to the lower
/// column). Kept entries are stored even when zero or negative.
SparseMatrix f_k_rowwise(const Matrix& s, std::size_t k, const PairFilter& filter = {});

/// The K_g allowed entries with the largest values over the whole matrix
/// (ties to the lower row-major index).
SparseMatrix f_K_global(const Matrix& s, std::size_t k_global, const PairFilter& filter = {});

/// Min-max normalization over the allowed entries; other entries become 0.
/// A constant input maps to all zeros.
Matrix f_n_normalize(const Matrix& s, const PairFilter& filter = {});

/// Converts kept similarity scores to soft weights in [0, 1]: cosine survivors
/// are clamped at 0, neg_euclidean survivors are min-max scaled per row (a row
/// of equal survivors maps to 1). Zero weights are dropped.
SparseMatrix similarity_to_weights(const SparseMatrix& kept, SimilarityMetric metric);

/// Batch-position view labels (0 or 1) in batch order.
std::vector<int> batch_views(const MiniBatchIndex& batch);

RelationGraph g_aug(const MiniBatchIndex& batch);
RelationGraph g_knn(const Matrix& h_batch, std::size_t k, SimilarityMetric metric,
                    const PairFilter& filter = {});
RelationGraph g_adj(const SourceGraph& g, const MiniBatchIndex& batch, const PairFilter& filter = {});
RelationGraph g_adj_filtered(const RelationGraph& adj, const RelationGraph& knn);
/// kNN graph over encoding rows looked up by each position's source node.
RelationGraph g_pse(const Matrix& encoding, const MiniBatchIndex& batch, std::size_t k,
                    SimilarityMetric metric, RelationKind kind, const PairFilter& filter = {});
RelationGraph g_rwse_filtered(const RelationGraph& rwse, const RelationGraph& knn);
/// G^P = P log(P)^T, then f_n and global (or row-wise) top selection.
/// `k_global` counts entries; the row-wise variant keeps max(1, round(k_global / N)) per row.
RelationGraph g_cluster(const Matrix& p, std::size_t k_global, bool global_topk = true,
                        const PairFilter& filter = {});

struct GraphStats {
  double entry_sum = 0.0;
  double nonzero_count = 0.0;
};

/// Raw (sum of weights, stored nonzero count).
GraphStats stats_f_s(const SparseMatrix& weights);

/// A relation graph entering aggregation. `values`, when set, is a 1 x nnz
/// on-tape vector in CSR order replacing the graph's constant weights.
struct AggregateInput {
  const RelationGraph* graph = nullptr;
  std::optional<ad::Var> values;
};

/// G = sum_i lambda_i G^(i) over the union support.
struct AggregatedGraph {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // row-major order
  ad::Var weights;                                         // 1 x pairs.size()
  ad::Var lambdas;                                         // 1 x number of graphs
  std::size_t n = 0;

  SparseMatrix to_sparse() const;
};

/// Hypernetwork Psi: (scaled sum, scaled count) -> logit, softmax over graphs.
class Aggregator {
 public:
  Aggregator() = default;
  Aggregator(nn::ParameterStore& store, const PsiConfig& cfg, Rng& rng);

  /// Psi input rows for the given graphs: ((sum/N^2 - shift)/scale, (count/N^2 - shift)/scale).
  Matrix features(std::span<const AggregateInput> graphs) const;

  /// With `binary`, aggregated weights are thresholded at 0.5 into constants.
  AggregatedGraph aggregate(const nn::Binding& params, std::span<const AggregateInput> graphs,
                            bool binary = false) const;

  bool enabled() const noexcept { return cfg_.enabled; }
  const nn::Mlp& network() const noexcept { return psi_; }

 private:
  PsiConfig cfg_;
  nn::Mlp psi_;
};

}  // namespace exgrg
