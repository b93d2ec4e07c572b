#include "exgrg/relgraph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "exgrg/error.hpp"

namespace exgrg {

std::string_view to_string(RelationKind k) {
  switch (k) {
    case RelationKind::kAug: return "aug";
    case RelationKind::kKnn: return "knn";
    case RelationKind::kAdj: return "adj";
    case RelationKind::kAdjFiltered: return "adj_filtered";
    case RelationKind::kLapPE: return "lappe";
    case RelationKind::kRwse: return "rwse";
    case RelationKind::kRwseFiltered: return "rwse_filtered";
    case RelationKind::kSignNet: return "signnet";
    case RelationKind::kCluster: return "cluster";
    case RelationKind::kAggregate: return "aggregate";
  }
  return "aug";
}

RelationKind parse_relation_kind(std::string_view name) {
  for (auto k : {RelationKind::kAug, RelationKind::kKnn, RelationKind::kAdj,
                 RelationKind::kAdjFiltered, RelationKind::kLapPE, RelationKind::kRwse,
                 RelationKind::kRwseFiltered, RelationKind::kSignNet, RelationKind::kCluster,
                 RelationKind::kAggregate})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown relation graph kind '" + std::string(name) + "'");
}

Matrix similarity_matrix(const Matrix& rows, SimilarityMetric metric) {
  const std::size_t n = rows.rows();
  const std::size_t d = rows.cols();
  Matrix s(n, n);
  if (metric == SimilarityMetric::kCosine) {
    s = matmul_nt(l2_normalize_rows(rows), l2_normalize_rows(rows));
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          const double diff = rows(i, c) - rows(j, c);
          acc += diff * diff;
        }
        s(i, j) = s(j, i) = -std::sqrt(acc);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) s(i, i) = 0.0;
  return s;
}

namespace {

struct Candidate {
  double value;
  std::size_t index;
};

// Larger value first; equal values keep the lower index first.
bool ranks_before(const Candidate& a, const Candidate& b) {
  return a.value != b.value ? a.value > b.value : a.index < b.index;
}

void require_square(const Matrix& s, const char* op) {
  if (s.rows() != s.cols()) throw ShapeError(std::string(op) + ": matrix is not square");
}

}  // namespace

SparseMatrix f_k_rowwise(const Matrix& s, std::size_t k, const PairFilter& filter) {
  if (k == 0) throw ConfigError("f_k_rowwise: k must be >= 1");
  require_square(s, "f_k_rowwise");
  const std::size_t n = s.rows();
  std::vector<Triplet> kept;
  kept.reserve(n * std::min(k, n));
  std::vector<Candidate> row;
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (filter.allows(i, j)) row.push_back({s(i, j), j});
    const std::size_t take = std::min(k, row.size());
    std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(take), row.end(),
                      ranks_before);
    for (std::size_t t = 0; t < take; ++t) kept.push_back({i, row[t].index, row[t].value});
  }
  return SparseMatrix::from_triplets(n, n, std::move(kept));
}

SparseMatrix f_K_global(const Matrix& s, std::size_t k_global, const PairFilter& filter) {
  if (k_global == 0) throw ConfigError("f_K_global: K_g must be >= 1");
  require_square(s, "f_K_global");
  const std::size_t n = s.rows();
  std::vector<Candidate> all;
  all.reserve(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (filter.allows(i, j)) all.push_back({s(i, j), i * n + j});
  const std::size_t take = std::min(k_global, all.size());
  std::nth_element(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(),
                   ranks_before);
  std::vector<Triplet> kept;
  kept.reserve(take);
  for (std::size_t t = 0; t < take; ++t)
    kept.push_back({all[t].index / n, all[t].index % n, all[t].value});
  return SparseMatrix::from_triplets(n, n, std::move(kept));
}

Matrix f_n_normalize(const Matrix& s, const PairFilter& filter) {
  require_square(s, "f_n_normalize");
  const std::size_t n = s.rows();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (filter.allows(i, j)) {
        lo = std::min(lo, s(i, j));
        hi = std::max(hi, s(i, j));
      }
  Matrix out(n, n);
  if (!(hi > lo)) return out;
  const double range = hi - lo;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (filter.allows(i, j)) out(i, j) = (s(i, j) - lo) / range;
  return out;
}

SparseMatrix similarity_to_weights(const SparseMatrix& kept, SimilarityMetric metric) {
  std::vector<Triplet> out;
  out.reserve(kept.nnz());
  for (std::size_t r = 0; r < kept.rows(); ++r) {
    const auto cols = kept.row_cols(r);
    const auto vals = kept.row_values(r);
    if (cols.empty()) continue;
    if (metric == SimilarityMetric::kCosine) {
      for (std::size_t p = 0; p < cols.size(); ++p) {
        const double w = std::clamp(vals[p], 0.0, 1.0);
        if (w > 0.0) out.push_back({r, cols[p], w});
      }
      continue;
    }
    const auto [lo_it, hi_it] = std::minmax_element(vals.begin(), vals.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    for (std::size_t p = 0; p < cols.size(); ++p) {
      const double w = hi > lo ? (vals[p] - lo) / (hi - lo) : 1.0;
      if (w > 0.0) out.push_back({r, cols[p], w});
    }
  }
  return SparseMatrix::from_triplets(kept.rows(), kept.cols(), std::move(out));
}

std::vector<int> batch_views(const MiniBatchIndex& batch) {
  std::vector<int> views(batch.size());
  for (std::size_t p = 0; p < batch.size(); ++p) views[p] = batch.view_of(p);
  return views;
}

RelationGraph g_aug(const MiniBatchIndex& batch) {
  const std::size_t n = batch.size();
  std::vector<Triplet> t;
  t.reserve(2 * batch.augment_pairs.size());
  for (const auto& [i, j] : batch.augment_pairs) {
    if (i >= n || j >= n || i == j) throw ShapeError("g_aug: invalid augmentation pair");
    t.push_back({i, j, 1.0});
    t.push_back({j, i, 1.0});
  }
  return {RelationKind::kAug, SparseMatrix::from_triplets(n, n, std::move(t), DuplicatePolicy::kMax)};
}

RelationGraph g_knn(const Matrix& h_batch, std::size_t k, SimilarityMetric metric,
                    const PairFilter& filter) {
  const SparseMatrix kept = f_k_rowwise(similarity_matrix(h_batch, metric), k, filter);
  return {RelationKind::kKnn, similarity_to_weights(kept, metric)};
}

RelationGraph g_adj(const SourceGraph& g, const MiniBatchIndex& batch, const PairFilter& filter) {
  const std::size_t n = batch.size();
  if (batch.num_source_nodes != g.num_nodes())
    throw ShapeError("g_adj: batch was sampled for a different graph");
  // Batch positions holding each source node.
  std::vector<std::vector<std::size_t>> positions(g.num_nodes());
  for (std::size_t p = 0; p < n; ++p) positions[batch.source_of(p)].push_back(p);
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t v : g.adjacency().row_cols(batch.source_of(i)))
      for (std::size_t j : positions[v])
        if (filter.allows(i, j)) t.push_back({i, j, 1.0});
  return {RelationKind::kAdj, SparseMatrix::from_triplets(n, n, std::move(t))};
}

RelationGraph g_adj_filtered(const RelationGraph& adj, const RelationGraph& knn) {
  return {RelationKind::kAdjFiltered, hadamard(adj.weights, knn.weights)};
}

RelationGraph g_pse(const Matrix& encoding, const MiniBatchIndex& batch, std::size_t k,
                    SimilarityMetric metric, RelationKind kind, const PairFilter& filter) {
  if (encoding.rows() != batch.num_source_nodes)
    throw ShapeError("g_pse: encoding rows do not match the source graph");
  std::vector<std::size_t> sources(batch.size());
  for (std::size_t p = 0; p < batch.size(); ++p) sources[p] = batch.source_of(p);
  const Matrix rows = gather_rows(encoding, sources);
  const SparseMatrix kept = f_k_rowwise(similarity_matrix(rows, metric), k, filter);
  return {kind, similarity_to_weights(kept, metric)};
}

RelationGraph g_rwse_filtered(const RelationGraph& rwse, const RelationGraph& knn) {
  return {RelationKind::kRwseFiltered, hadamard(rwse.weights, knn.weights)};
}

RelationGraph g_cluster(const Matrix& p, std::size_t k_global, bool global_topk,
                        const PairFilter& filter) {
  const std::size_t n = p.rows();
  Matrix log_p(p.rows(), p.cols());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p.values()[i] > 0.0)) throw NumericError("g_cluster: assignment probabilities must be > 0");
    log_p.values()[i] = std::log(p.values()[i]);
  }
  const Matrix normalized = f_n_normalize(matmul_nt(p, log_p), filter);
  SparseMatrix kept;
  if (global_topk) {
    kept = f_K_global(normalized, k_global, filter);
  } else {
    const double per_row = std::round(static_cast<double>(k_global) / static_cast<double>(n));
    kept = f_k_rowwise(normalized, std::max<std::size_t>(1, static_cast<std::size_t>(per_row)),
                       filter);
  }
  std::vector<Triplet> t;
  for (const auto& e : kept.triplets())
    if (e.value > 0.0) t.push_back(e);
  return {RelationKind::kCluster, SparseMatrix::from_triplets(n, n, std::move(t))};
}

GraphStats stats_f_s(const SparseMatrix& weights) {
  GraphStats s;
  for (double v : weights.values()) s.entry_sum += v;
  s.nonzero_count = static_cast<double>(weights.nnz());
  return s;
}

SparseMatrix AggregatedGraph::to_sparse() const {
  std::vector<Triplet> t;
  t.reserve(pairs.size());
  const Matrix& w = weights.value();
  for (std::size_t p = 0; p < pairs.size(); ++p) t.push_back({pairs[p].first, pairs[p].second, w(0, p)});
  return SparseMatrix::from_triplets(n, n, std::move(t));
}

Aggregator::Aggregator(nn::ParameterStore& store, const PsiConfig& cfg, Rng& rng) : cfg_(cfg) {
  if (!cfg.enabled) return;
  const std::size_t width = 2 * cfg.hidden_ratio;
  std::vector<std::size_t> dims{2};
  for (std::size_t l = 1; l < cfg.layers; ++l) dims.push_back(width);
  dims.push_back(1);
  psi_ = nn::Mlp(store, "psi", dims, cfg.activation, nn::Norm::kNone, rng);
}

Matrix Aggregator::features(std::span<const AggregateInput> graphs) const {
  Matrix f(graphs.size(), 2);
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const double n = static_cast<double>(graphs[i].graph->size());
    const double denom = n > 0.0 ? n * n : 1.0;
    const GraphStats s = stats_f_s(graphs[i].graph->weights);
    f(i, 0) = (s.entry_sum / denom - cfg_.sum_shift) / cfg_.sum_scale;
    f(i, 1) = (s.nonzero_count / denom - cfg_.count_shift) / cfg_.count_scale;
  }
  return f;
}

AggregatedGraph Aggregator::aggregate(const nn::Binding& params,
                                      std::span<const AggregateInput> graphs, bool binary) const {
  if (graphs.empty()) throw ConfigError("aggregate: no relation graphs");
  ad::Tape& tape = params.tape();
  const std::size_t n = graphs.front().graph->size();
  for (const auto& in : graphs) {
    if (in.graph->size() != n) throw ShapeError("aggregate: relation graphs differ in size");
    if (in.values && (in.values->rows() != 1 || in.values->cols() != in.graph->weights.nnz()))
      throw ShapeError("aggregate: on-tape values do not match the graph support");
  }

  AggregatedGraph out;
  out.n = n;
  for (const auto& in : graphs)
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c : in.graph->weights.row_cols(r)) out.pairs.emplace_back(r, c);
  std::sort(out.pairs.begin(), out.pairs.end());
  out.pairs.erase(std::unique(out.pairs.begin(), out.pairs.end()), out.pairs.end());

  if (cfg_.enabled) {
    const ad::Var logits = psi_.forward(params, tape.constant(features(graphs)));
    out.lambdas = ad::row_softmax(ad::transpose(logits));
  } else {
    out.lambdas = tape.constant(Matrix(1, graphs.size(), 1.0 / static_cast<double>(graphs.size())));
  }

  const std::size_t total = out.pairs.size();
  ad::Var acc;
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    const SparseMatrix& w = graphs[g].graph->weights;
    std::vector<std::size_t> positions;
    positions.reserve(w.nnz());
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c : w.row_cols(r)) {
        const auto it = std::lower_bound(out.pairs.begin(), out.pairs.end(), std::make_pair(r, c));
        positions.push_back(static_cast<std::size_t>(it - out.pairs.begin()));
      }
    const ad::Var values = graphs[g].values
                               ? *graphs[g].values
                               : tape.constant(Matrix(1, w.nnz(), std::vector<double>(
                                                                      w.values().begin(),
                                                                      w.values().end())));
    const ad::Var term =
        ad::mul(ad::scatter_columns(values, positions, total), ad::element(out.lambdas, 0, g));
    acc = acc.valid() ? ad::add(acc, term) : term;
  }
  if (binary) {
    Matrix thresholded = acc.value();
    for (double& v : thresholded.values()) v = v >= 0.5 ? 1.0 : 0.0;
    acc = tape.constant(std::move(thresholded));
  }
  out.weights = acc;
  return out;
}

}  // namespace exgrg
