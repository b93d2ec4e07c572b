#include <gtest/gtest.h>

#include <numeric>

#include "exgrg/error.hpp"
#include "exgrg/pse.hpp"
#include "support.hpp"

namespace exgrg {
namespace {

using testing::graph_from_edges;
using testing::random_matrix;

// Diagonals of (D^-1 A)^k by dense long-double powers.
Matrix rwse_oracle(const SourceGraph& g, std::size_t kernel) {
  const std::size_t n = g.num_nodes();
  const Matrix a = g.adjacency().to_dense();
  std::vector<long double> p(n * n), cur(n * n), next(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t d = g.degree(i);
      p[i * n + j] = d ? a(i, j) / static_cast<long double>(d) : 0;
      cur[i * n + j] = i == j;
    }
  Matrix out(n, kernel);
  for (std::size_t k = 0; k < kernel; ++k) {
    std::fill(next.begin(), next.end(), 0.0L);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t m = 0; m < n; ++m)
        for (std::size_t j = 0; j < n; ++j) next[i * n + j] += cur[i * n + m] * p[m * n + j];
    cur.swap(next);
    for (std::size_t i = 0; i < n; ++i) out(i, k) = static_cast<double>(cur[i * n + i]);
  }
  return out;
}

TEST(Pse, LapPESkipsExactlyTheZeroMode) {
  Rng rng(1);
  const SourceGraph g = testing::random_graph(10, 0.6, 2, rng);
  ASSERT_EQ(count_components(g.adjacency()), 1u);
  const auto d = eigendecompose_symmetric(laplacian(g, true));
  const Encoding e = lappe(g, 9);
  ASSERT_EQ(e.values.cols(), 9u);
  for (std::size_t c = 0; c < 9; ++c)
    for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(e.values(i, c), d.eigenvectors(i, c + 1));
  EXPECT_THROW(lappe(g, 10), ConfigError);
  EXPECT_THROW(lappe(g, 0), ConfigError);
}

TEST(Pse, DisjointTrianglesHaveFourNonZeroModes) {
  const SourceGraph g = graph_from_edges(6, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}});
  const Encoding e = lappe(g, 4);
  EXPECT_EQ(e.values.cols(), 4u);
  try {
    lappe(g, 5);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& err) {
    EXPECT_NE(std::string(err.what()).find("only 4"), std::string::npos) << err.what();
  }
}

TEST(Pse, RwseClosedFormsOnSmallGraphs) {
  const Encoding k2 = rwse(graph_from_edges(2, {{0, 1}}), 4);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(k2.values(i, 0), 0.0);
    EXPECT_EQ(k2.values(i, 1), 1.0);
    EXPECT_EQ(k2.values(i, 2), 0.0);
    EXPECT_EQ(k2.values(i, 3), 1.0);
  }
  // Triangle: (1 + 2 (-1/2)^k) / 3.
  const Encoding k3 = rwse(graph_from_edges(3, {{0, 1}, {1, 2}, {0, 2}}), 4);
  const double want[] = {0.0, 0.5, 0.25, 0.375};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(k3.values(i, k), want[k], 1e-15);
}

TEST(Pse, RwseMatchesDenseMatrixPowers) {
  Rng rng(2);
  const SourceGraph g = testing::random_graph(25, 0.15, 2, rng);
  const Encoding e = rwse(g, 8);
  EXPECT_LT(max_abs_diff(e.values, rwse_oracle(g, 8)), 1e-13);
  for (std::size_t i = 0; i < g.num_nodes(); ++i) EXPECT_EQ(e.isolated[i], g.degree(i) == 0);
}

TEST(Pse, RwseIsExactlyPermutationEquivariant) {
  Rng rng(3);
  const SourceGraph g = testing::random_graph(30, 0.12, 2, rng);
  std::vector<std::size_t> perm(30);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (const auto& t : g.adjacency().triplets()) edges.emplace_back(perm[t.row], perm[t.col]);
  const SourceGraph h = graph_from_edges(30, edges);
  const Encoding a = rwse(g, 10), b = rwse(h, 10);
  for (std::size_t i = 0; i < 30; ++i)
    for (std::size_t k = 0; k < 10; ++k) EXPECT_EQ(a.values(i, k), b.values(perm[i], k));
}

TEST(Pse, RwseMonteCarloApproachesExact) {
  Rng rng(4);
  const SourceGraph g = testing::random_graph(20, 0.25, 2, rng);
  RwseOptions mc;
  mc.exact_limit = 0;
  mc.walks_per_node = 20000;
  mc.seed = 11;
  const Encoding approx = rwse(g, 6, mc);
  // Binomial standard error is at most 0.0036 here.
  EXPECT_LT(max_abs_diff(approx.values, rwse(g, 6).values), 0.02);
  EXPECT_EQ(approx.values, rwse(g, 6, mc).values);
}

TEST(Pse, RwseIsolatedNodeRowIsZero) {
  const Encoding e = rwse(graph_from_edges(3, {{0, 1}}), 3);
  EXPECT_TRUE(e.isolated[2]);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(e.values(2, k), 0.0);
}

class SignNetArchTest : public ::testing::TestWithParam<SignNetArch> {};

TEST_P(SignNetArchTest, OutputIsInvariantToEigenvectorSigns) {
  Rng rng(5);
  nn::ParameterStore store;
  const SignNet net(store, "signnet", 4, 8, 5, GetParam(), rng, false);
  const Matrix v = random_matrix(12, 4, rng);
  const Encoding base = signnet_encode(net, store, v);
  ASSERT_EQ(base.values.rows(), 12u);
  ASSERT_EQ(base.values.cols(), 5u);
  for (unsigned mask = 1; mask < 16; ++mask) {
    Matrix flipped = v;
    for (std::size_t c = 0; c < 4; ++c)
      if (mask & (1u << c))
        for (std::size_t r = 0; r < 12; ++r) flipped(r, c) = -flipped(r, c);
    EXPECT_EQ(signnet_encode(net, store, flipped).values, base.values) << "mask " << mask;
  }
}

TEST_P(SignNetArchTest, ParametersFollowTrainableFlag) {
  Rng rng(6);
  nn::ParameterStore frozen, live;
  const SignNet a(frozen, "s", 3, 4, 2, GetParam(), rng, false);
  const SignNet b(live, "s", 3, 4, 2, GetParam(), rng, true);
  for (const auto& p : frozen) EXPECT_FALSE(p.trainable) << p.name;
  for (const auto& p : live) EXPECT_TRUE(p.trainable) << p.name;
  EXPECT_THROW(signnet_encode(a, frozen, Matrix(5, 2)), ShapeError);
}

INSTANTIATE_TEST_SUITE_P(Archs, SignNetArchTest,
                         ::testing::Values(SignNetArch::kDeepSet, SignNetArch::kMlp));

TEST(Pse, SignNetMlpDependsOnEigenvectorOrder) {
  Rng rng(7);
  nn::ParameterStore store;
  const SignNet net(store, "s", 2, 6, 3, SignNetArch::kMlp, rng, false);
  const Matrix v = random_matrix(5, 2, rng);
  Matrix swapped(5, 2);
  for (std::size_t r = 0; r < 5; ++r) {
    swapped(r, 0) = v(r, 1);
    swapped(r, 1) = v(r, 0);
  }
  EXPECT_GT(max_abs_diff(signnet_encode(net, store, v).values,
                         signnet_encode(net, store, swapped).values),
            1e-6);
}

}  // namespace
}  // namespace exgrg
