#pragma once

#include <gtest/gtest.h>

#include <cstddef>
#include <random>
#include <vector>

#include "exgrg/graph.hpp"
#include "exgrg/matrix.hpp"
#include "exgrg/sparse.hpp"

namespace exgrg::testing {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = n(rng);
  return m;
}

/// Erdos-Renyi source graph with Gaussian features and labels i % classes.
inline SourceGraph random_graph(std::size_t nodes, double p, std::size_t dim, Rng& rng,
                                int classes = 2) {
  std::bernoulli_distribution edge(p);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < nodes; ++i)
    for (std::size_t j = i + 1; j < nodes; ++j)
      if (edge(rng)) edges.emplace_back(i, j);
  std::vector<int> labels(nodes);
  for (std::size_t i = 0; i < nodes; ++i) labels[i] = static_cast<int>(i % classes);
  return SourceGraph(symmetric_adjacency(nodes, edges), random_matrix(nodes, dim, rng), labels);
}

inline SparseMatrix edges_to_adjacency(std::size_t n,
                                       const std::vector<std::pair<std::size_t, std::size_t>>& e) {
  return symmetric_adjacency(n, e);
}

inline SourceGraph graph_from_edges(std::size_t n,
                                    const std::vector<std::pair<std::size_t, std::size_t>>& e,
                                    std::size_t dim = 1) {
  return SourceGraph(symmetric_adjacency(n, e), Matrix(n, dim, 1.0));
}

}  // namespace exgrg::testing
