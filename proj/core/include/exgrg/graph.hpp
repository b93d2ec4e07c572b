#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "exgrg/matrix.hpp"
#include "exgrg/sparse.hpp"

namespace exgrg {

/// Seeded generator used everywhere randomness is needed.
using Rng = std::mt19937_64;

/// Independent generator for (seed, stream); both 64-bit words feed the seed sequence.
Rng derive_rng(std::uint64_t seed, std::uint64_t stream);

/// Undirected attributed graph G^s = (A^s, X^s) with optional labels Y^s.
///
/// Invariants (checked by the constructor):
///   - adjacency is square, 0/1 valued, symmetric, and has no diagonal;
///   - features has one row per node;
///   - labels, when present, have one entry per node in [0, num_classes).
class SourceGraph {
 public:
  SourceGraph() = default;
  SourceGraph(SparseMatrix adjacency, Matrix features,
              std::optional<std::vector<int>> labels = std::nullopt);

  std::size_t num_nodes() const noexcept { return adjacency_.rows(); }
  std::size_t feature_dim() const noexcept { return features_.cols(); }
  /// Number of undirected edges.
  std::size_t num_edges() const noexcept { return adjacency_.nnz() / 2; }

  const SparseMatrix& adjacency() const noexcept { return adjacency_; }
  const Matrix& features() const noexcept { return features_; }
  const std::optional<std::vector<int>>& labels() const noexcept { return labels_; }
  int num_classes() const noexcept { return num_classes_; }

  std::size_t degree(std::size_t node) const noexcept {
    return adjacency_.row_cols(node).size();
  }

 private:
  SparseMatrix adjacency_;
  Matrix features_;
  std::optional<std::vector<int>> labels_;
  int num_classes_ = 0;
};

/// Builds a symmetric, deduplicated, self-loop-free 0/1 adjacency from an
/// arbitrary list of (possibly directed, repeated) edges.
SparseMatrix symmetric_adjacency(std::size_t num_nodes,
                                 const std::vector<std::pair<std::size_t, std::size_t>>& edges);

/// Loads a graph from an edge list, a feature CSV and an optional label file.
SourceGraph load_graph(const std::filesystem::path& edge_list_path,
                       const std::filesystem::path& features_path,
                       const std::optional<std::filesystem::path>& labels_path = std::nullopt);

/// Loads `edges.txt`, `features.csv` and (if present) `labels.txt` from a directory.
SourceGraph load_graph_dir(const std::filesystem::path& dir);

/// Writes the three files read by load_graph_dir.
void save_graph_dir(const SourceGraph& g, const std::filesystem::path& dir);

struct SbmParams {
  std::size_t blocks = 2;
  std::size_t nodes_per_block = 50;
  double p_in = 0.1;
  double p_out = 0.01;
  std::size_t feature_dim = 16;
  /// Standard deviation of the Gaussian noise added to the one-hot block signal.
  double feature_noise = 1.0;
  std::uint64_t seed = 0;
};

/// Stochastic block model. Features are a one-hot block indicator (folded
/// modulo feature_dim) plus seeded Gaussian noise; labels are block ids.
SourceGraph generate_sbm(const SbmParams& params);

enum class FeatureMaskMode {
  kColumn,  ///< zero a feature dimension across all nodes
  kEntry,   ///< zero individual node/feature entries
};

struct AugmentConfig {
  double edge_drop_prob = 0.0;
  double feature_mask_prob = 0.0;
  FeatureMaskMode mask_mode = FeatureMaskMode::kColumn;

  void validate() const;
};

/// One stochastic view (A^(i), X^(i)) of a source graph.
struct GraphView {
  SparseMatrix adjacency;
  Matrix features;
};

GraphView augment(const SourceGraph& g, const AugmentConfig& cfg, Rng& rng);

/// Two augmented views stacked into the mini-batch graph G = (A, X).
struct ViewPair {
  GraphView view1;
  GraphView view2;
  /// diag(A^(1), A^(2)), 2M x 2M.
  SparseMatrix block_adjacency;
  /// [X^(1); X^(2)], 2M x D_in.
  Matrix stacked_features;

  std::size_t num_source_nodes() const noexcept { return view1.features.rows(); }
};

ViewPair build_views(const SourceGraph& g, const AugmentConfig& cfg1, const AugmentConfig& cfg2,
                     Rng& rng);

/// Rows of the stacked 2M matrices selected for one loss evaluation.
///
/// Layout: positions [0, N/2) hold view-1 rows of the sampled source nodes and
/// positions [N/2, N) the view-2 rows of the same nodes in the same order, so
/// augment_pairs is {(t, t + N/2)}.
struct MiniBatchIndex {
  std::vector<std::size_t> batch_nodes;
  std::vector<std::pair<std::size_t, std::size_t>> augment_pairs;
  std::size_t num_source_nodes = 0;

  std::size_t size() const noexcept { return batch_nodes.size(); }
  std::size_t source_of(std::size_t position) const noexcept {
    return batch_nodes[position] % num_source_nodes;
  }
  /// 0 for view-1 rows, 1 for view-2 rows.
  int view_of(std::size_t position) const noexcept {
    return batch_nodes[position] < num_source_nodes ? 0 : 1;
  }
};

MiniBatchIndex sample_batch(std::size_t num_source_nodes, std::size_t batch_size, Rng& rng);
MiniBatchIndex sample_batch(const ViewPair& pair, std::size_t batch_size, Rng& rng);

/// Train/validation/test node ids.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Reads a split file with lines "train: 1,2,3", "val: ...", "test: ...".
Split load_split(const std::filesystem::path& path, std::size_t num_nodes);

/// Number of connected components of an undirected sparse support.
std::size_t count_components(const SparseMatrix& adjacency);

}  // namespace exgrg
