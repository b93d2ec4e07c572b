#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include "exgrg/error.hpp"
#include "exgrg/pse.hpp"
#include "exgrg/relgraph.hpp"
#include "support.hpp"

namespace exgrg {
namespace {

using testing::random_matrix;
using Entry = std::tuple<std::size_t, std::size_t, double>;

std::set<Entry> entries(const SparseMatrix& s) {
  std::set<Entry> out;
  for (const auto& t : s.triplets()) out.insert({t.row, t.col, t.value});
  return out;
}

// Scores drawn from a small set so ties are frequent.
Matrix tied_scores(std::size_t n, Rng& rng) {
  std::uniform_int_distribution<int> level(0, 3);
  Matrix s(n, n);
  for (double& v : s.values()) v = 0.25 * level(rng);
  return s;
}

// Brute force top-k: repeatedly take the best remaining entry scanning in index order.
std::set<Entry> brute_topk_row(const Matrix& s, std::size_t k, const PairFilter& f) {
  std::set<Entry> out;
  for (std::size_t i = 0; i < s.rows(); ++i) {
    std::vector<bool> used(s.cols(), false);
    for (std::size_t t = 0; t < k; ++t) {
      std::size_t best = s.cols();
      for (std::size_t j = 0; j < s.cols(); ++j)
        if (f.allows(i, j) && !used[j] && (best == s.cols() || s(i, j) > s(i, best))) best = j;
      if (best == s.cols()) break;
      used[best] = true;
      out.insert({i, best, s(i, best)});
    }
  }
  return out;
}

std::set<Entry> brute_topk_global(const Matrix& s, std::size_t k, const PairFilter& f) {
  const std::size_t n = s.rows();
  std::set<Entry> out;
  std::vector<bool> used(n * n, false);
  for (std::size_t t = 0; t < k; ++t) {
    std::size_t best = n * n;
    for (std::size_t idx = 0; idx < n * n; ++idx) {
      const std::size_t i = idx / n, j = idx % n;
      if (f.allows(i, j) && !used[idx] && (best == n * n || s(i, j) > s(best / n, best % n)))
        best = idx;
    }
    if (best == n * n) break;
    used[best] = true;
    out.insert({best / n, best % n, s(best / n, best % n)});
  }
  return out;
}

TEST(RelGraph, RowwiseTopKMatchesBruteForceWithTies) {
  Rng rng(1);
  const std::vector<int> views{0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix s = tied_scores(10, rng);
    for (std::size_t k : {1u, 3u, 9u, 20u}) {
      EXPECT_EQ(entries(f_k_rowwise(s, k)), brute_topk_row(s, k, {}));
      const PairFilter cross{views, false};
      EXPECT_EQ(entries(f_k_rowwise(s, k, cross)), brute_topk_row(s, k, cross));
    }
  }
  EXPECT_THROW(f_k_rowwise(Matrix(3, 3), 0), ConfigError);
}

TEST(RelGraph, GlobalTopKMatchesBruteForceWithTies) {
  Rng rng(2);
  const std::vector<int> views{0, 0, 0, 0, 1, 1, 1, 1};
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix s = tied_scores(8, rng);
    for (std::size_t k : {1u, 7u, 30u, 100u}) {
      EXPECT_EQ(entries(f_K_global(s, k)), brute_topk_global(s, k, {}));
      const PairFilter cross{views, false};
      EXPECT_EQ(entries(f_K_global(s, k, cross)), brute_topk_global(s, k, cross));
    }
  }
}

TEST(RelGraph, MinMaxNormalization) {
  const Matrix s = Matrix::from_rows({{9, 1, 3}, {2, 9, 5}, {1, 1, 9}});
  const Matrix n = f_n_normalize(s);
  // Off-diagonal range is [1, 5].
  const Matrix want = Matrix::from_rows({{0, 0, 0.5}, {0.25, 0, 1}, {0, 0, 0}});
  EXPECT_LT(max_abs_diff(n, want), 1e-15);
  EXPECT_EQ(f_n_normalize(Matrix(3, 3, 2.0)), Matrix(3, 3));
}

TEST(RelGraph, SimilarityMatrixDefinitions) {
  const Matrix x = Matrix::from_rows({{1, 0}, {0, 2}, {3, 0}, {0, 0}});
  const Matrix cos = similarity_matrix(x, SimilarityMetric::kCosine);
  EXPECT_DOUBLE_EQ(cos(0, 2), 1.0);
  EXPECT_DOUBLE_EQ(cos(0, 1), 0.0);
  EXPECT_EQ(cos(3, 0), 0.0);
  EXPECT_EQ(cos(1, 1), 0.0);
  const Matrix euc = similarity_matrix(x, SimilarityMetric::kNegEuclidean);
  EXPECT_DOUBLE_EQ(euc(0, 1), -std::sqrt(5.0));
  EXPECT_DOUBLE_EQ(euc(2, 0), -2.0);
  EXPECT_EQ(euc(2, 2), 0.0);
}

TEST(RelGraph, SimilarityToWeights) {
  const SparseMatrix kept = SparseMatrix::from_triplets(
      2, 3, {{0, 1, -0.2}, {0, 2, 0.7}, {1, 0, -3.0}, {1, 2, -1.0}});
  const Matrix cos = similarity_to_weights(kept, SimilarityMetric::kCosine).to_dense();
  EXPECT_EQ(cos, Matrix::from_rows({{0, 0, 0.7}, {0, 0, 0}}));
  const Matrix euc = similarity_to_weights(kept, SimilarityMetric::kNegEuclidean).to_dense();
  EXPECT_EQ(euc, Matrix::from_rows({{0, 0, 1}, {0, 0, 1}}));
  const SparseMatrix flat = SparseMatrix::from_triplets(1, 3, {{0, 0, -2.0}, {0, 2, -2.0}});
  EXPECT_EQ(similarity_to_weights(flat, SimilarityMetric::kNegEuclidean).nnz(), 2u);
}

TEST(RelGraph, AugGraphHasHalfNComponents) {
  Rng rng(3);
  const MiniBatchIndex b = sample_batch(20, 8, rng);
  const RelationGraph g = g_aug(b);
  EXPECT_EQ(g.weights.nnz(), 8u);
  for (std::size_t t = 0; t < 4; ++t) {
    EXPECT_EQ(g.weights.at(t, t + 4), 1.0);
    EXPECT_EQ(g.weights.at(t + 4, t), 1.0);
  }
  const RankDiagnostic d = laplacian_rank_diagnostic(g.weights);
  EXPECT_EQ(d.zero_eigenvalues, 4u);
  EXPECT_EQ(d.components, 4u);
}

TEST(RelGraph, RankDiagnosticCountsComponents) {
  // Two triangles and an isolated node.
  const SparseMatrix a = symmetric_adjacency(7, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}});
  const RankDiagnostic d = laplacian_rank_diagnostic(a);
  EXPECT_EQ(d.zero_eigenvalues, 3u);
  EXPECT_EQ(d.components, 3u);
}

TEST(RelGraph, AdjacencyGraphMatchesBruteForce) {
  Rng rng(4);
  const SourceGraph g = testing::random_graph(15, 0.3, 2, rng);
  const MiniBatchIndex b = sample_batch(15, 12, rng);
  const std::vector<int> views = batch_views(b);
  for (bool intra : {true, false}) {
    const PairFilter f{views, intra};
    const SparseMatrix got = g_adj(g, b, f).weights;
    for (std::size_t i = 0; i < 12; ++i)
      for (std::size_t j = 0; j < 12; ++j) {
        const bool want = f.allows(i, j) && g.adjacency().contains(b.source_of(i), b.source_of(j));
        EXPECT_EQ(got.at(i, j), want ? 1.0 : 0.0) << i << "," << j;
      }
  }
}

TEST(RelGraph, FilteredGraphsAreHadamardProducts) {
  const RelationGraph adj{RelationKind::kAdj,
                          SparseMatrix::from_triplets(3, 3, {{0, 1, 1.0}, {1, 2, 1.0}})};
  const RelationGraph knn{RelationKind::kKnn,
                          SparseMatrix::from_triplets(3, 3, {{0, 1, 0.4}, {2, 1, 0.9}})};
  const RelationGraph f = g_adj_filtered(adj, knn);
  EXPECT_EQ(f.kind, RelationKind::kAdjFiltered);
  EXPECT_EQ(f.weights.to_dense(), Matrix::from_rows({{0, 0.4, 0}, {0, 0, 0}, {0, 0, 0}}));
  EXPECT_EQ(g_rwse_filtered(adj, knn).kind, RelationKind::kRwseFiltered);
}

TEST(RelGraph, KnnGraphKeepsKPerRow) {
  Rng rng(5);
  const Matrix h = random_matrix(16, 4, rng);
  const RelationGraph g = g_knn(h, 3, SimilarityMetric::kNegEuclidean);
  const Matrix s = similarity_matrix(h, SimilarityMetric::kNegEuclidean);
  // Survivors are min-max scaled per row, so the k-th neighbour maps to 0 and drops out.
  std::vector<double> lo(16, 0.0), hi(16, -1e300);
  const auto want = brute_topk_row(s, 3, {});
  for (std::size_t r = 0; r < 16; ++r) lo[r] = 1e300;
  for (const auto& [i, j, v] : want) {
    lo[i] = std::min(lo[i], v);
    hi[i] = std::max(hi[i], v);
  }
  std::size_t expected_nnz = 0;
  for (const auto& [i, j, v] : want) {
    const double w = (v - lo[i]) / (hi[i] - lo[i]);
    if (w > 0.0) {
      ++expected_nnz;
      EXPECT_NEAR(g.weights.at(i, j), w, 1e-15);
    }
  }
  EXPECT_EQ(g.weights.nnz(), expected_nnz);
  for (std::size_t r = 0; r < 16; ++r) EXPECT_EQ(g.weights.row_cols(r).size(), 2u);
}

TEST(RelGraph, PseGraphUsesSourceRows) {
  // Both views of a node share the encoding row, so with k = 1 and distinct
  // rows each position's nearest neighbour is its twin.
  Rng rng(6);
  const Matrix enc = random_matrix(10, 3, rng);
  const MiniBatchIndex b = sample_batch(10, 8, rng);
  const RelationGraph g = g_pse(enc, b, 1, SimilarityMetric::kNegEuclidean, RelationKind::kLapPE);
  EXPECT_EQ(g.kind, RelationKind::kLapPE);
  for (const auto& [i, j] : b.augment_pairs) {
    EXPECT_TRUE(g.weights.contains(i, j));
    EXPECT_TRUE(g.weights.contains(j, i));
  }
  EXPECT_THROW(g_pse(Matrix(9, 3), b, 1, SimilarityMetric::kCosine, RelationKind::kLapPE),
               ShapeError);
}

TEST(RelGraph, ClusterGraphMatchesDirectComputation) {
  Rng rng(7);
  Matrix p = random_matrix(10, 4, rng);
  for (std::size_t r = 0; r < 10; ++r) {
    double s = 0.0;
    for (double& v : p.row(r)) s += (v = std::exp(v));
    for (double& v : p.row(r)) v /= s;
  }
  // G^P[i, j] = sum_k P[i, k] log P[j, k].
  Matrix gp(10, 10);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 10; ++j)
      for (std::size_t k = 0; k < 4; ++k) gp(i, j) += p(i, k) * std::log(p(j, k));
  const Matrix norm = f_n_normalize(gp);
  std::set<Entry> want;
  for (const auto& e : brute_topk_global(norm, 25, {}))
    if (std::get<2>(e) > 0.0) want.insert(e);
  const RelationGraph got = g_cluster(p, 25);
  ASSERT_EQ(got.weights.nnz(), want.size());
  for (const auto& [i, j, v] : want) EXPECT_NEAR(got.weights.at(i, j), v, 1e-12);
  const RelationGraph rowwise = g_cluster(p, 25, false);
  // round(25 / 10) = 3 per row before zero-weight entries drop.
  for (std::size_t r = 0; r < 10; ++r) EXPECT_LE(rowwise.weights.row_cols(r).size(), 3u);
}

TEST(RelGraph, AggregationMatchesWeightedSum) {
  Rng rng(8);
  const std::size_t n = 6;
  const RelationGraph a{RelationKind::kAug, SparseMatrix::from_dense(random_matrix(n, n, rng))};
  const RelationGraph b{RelationKind::kKnn,
                        SparseMatrix::from_triplets(n, n, {{0, 1, 0.5}, {3, 2, 0.25}})};
  nn::ParameterStore store;
  const Aggregator agg(store, PsiConfig{}, rng);
  ad::Tape tape;
  const nn::Binding params(tape, store);
  const std::vector<AggregateInput> in{{&a, std::nullopt}, {&b, std::nullopt}};
  const AggregatedGraph out = agg.aggregate(params, in);
  const Matrix lambdas = out.lambdas.value();
  EXPECT_NEAR(lambdas(0, 0) + lambdas(0, 1), 1.0, 1e-15);
  Matrix want = a.weights.to_dense();
  const Matrix bd = b.weights.to_dense();
  for (std::size_t i = 0; i < n * n; ++i)
    want.values()[i] = lambdas(0, 0) * want.values()[i] + lambdas(0, 1) * bd.values()[i];
  EXPECT_LT(max_abs_diff(out.to_sparse().to_dense(), want), 1e-15);
  EXPECT_TRUE(std::is_sorted(out.pairs.begin(), out.pairs.end()));
}

TEST(RelGraph, AggregatorFeaturesAndUniformFallback) {
  Rng rng(9);
  const RelationGraph a{RelationKind::kAug,
                        SparseMatrix::from_triplets(4, 4, {{0, 1, 1.0}, {1, 0, 1.0}})};
  const RelationGraph b{RelationKind::kCluster, SparseMatrix::from_triplets(4, 4, {{2, 3, 0.5}})};
  const std::vector<AggregateInput> in{{&a, std::nullopt}, {&b, std::nullopt}};
  PsiConfig cfg;
  cfg.sum_shift = 0.1;
  cfg.sum_scale = 2.0;
  nn::ParameterStore store;
  const Aggregator with_psi(store, cfg, rng);
  const Matrix f = with_psi.features(in);
  EXPECT_DOUBLE_EQ(f(0, 0), (2.0 / 16.0 - 0.1) / 2.0);
  EXPECT_DOUBLE_EQ(f(1, 1), (1.0 / 16.0) / cfg.count_scale);

  cfg.enabled = false;
  nn::ParameterStore empty;
  const Aggregator uniform(empty, cfg, rng);
  EXPECT_EQ(empty.size(), 0u);
  ad::Tape tape;
  const nn::Binding params(tape, empty);
  const AggregatedGraph out = uniform.aggregate(params, in);
  EXPECT_EQ(out.lambdas.value(), Matrix(1, 2, 0.5));
}

TEST(RelGraph, BinaryAggregationThresholds) {
  const RelationGraph a{RelationKind::kAug, SparseMatrix::from_triplets(2, 2, {{0, 1, 1.0}})};
  const RelationGraph b{RelationKind::kKnn, SparseMatrix::from_triplets(2, 2, {{1, 0, 0.4}})};
  PsiConfig cfg;
  cfg.enabled = false;
  Rng rng(10);
  nn::ParameterStore store;
  const Aggregator agg(store, cfg, rng);
  ad::Tape tape;
  const nn::Binding params(tape, store);
  const std::vector<AggregateInput> in{{&a, std::nullopt}, {&b, std::nullopt}};
  EXPECT_EQ(agg.aggregate(params, in, true).to_sparse().to_dense(),
            Matrix::from_rows({{0, 1}, {0, 0}}));
}

TEST(RelGraph, LambdaGradientFlowsThroughPsi) {
  Rng rng(11);
  const RelationGraph a{RelationKind::kAug, SparseMatrix::from_triplets(3, 3, {{0, 1, 1.0}})};
  const RelationGraph b{RelationKind::kKnn,
                        SparseMatrix::from_triplets(3, 3, {{0, 1, 0.2}, {1, 2, 0.8}})};
  nn::ParameterStore store;
  const Aggregator agg(store, PsiConfig{}, rng);
  ad::Tape tape;
  const nn::Binding params(tape, store);
  const std::vector<AggregateInput> in{{&a, std::nullopt}, {&b, std::nullopt}};
  const AggregatedGraph out = agg.aggregate(params, in);
  const auto g = tape.backward(ad::sum(ad::square(out.weights)));
  double total = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) total += g.norm(params[i]);
  EXPECT_GT(total, 0.0);
}

TEST(RelGraph, KindNamesRoundTrip) {
  for (auto k : {RelationKind::kAug, RelationKind::kKnn, RelationKind::kAdj,
                 RelationKind::kAdjFiltered, RelationKind::kLapPE, RelationKind::kRwse,
                 RelationKind::kRwseFiltered, RelationKind::kSignNet, RelationKind::kCluster})
    EXPECT_EQ(parse_relation_kind(to_string(k)), k);
  EXPECT_THROW(parse_relation_kind("bogus"), ConfigError);
}

}  // namespace
}  // namespace exgrg
