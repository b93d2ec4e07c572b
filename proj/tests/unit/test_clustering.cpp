#include <gtest/gtest.h>

#include <cmath>

#include "exgrg/clustering.hpp"
#include "exgrg/error.hpp"
#include "support.hpp"

namespace exgrg {
namespace {

using testing::random_matrix;

// Plain-domain Sinkhorn in long double: scale columns to 1/K, then rows to 1/N.
Matrix sinkhorn_oracle(const Matrix& scores, double eps, std::size_t iters) {
  const std::size_t n = scores.rows(), k = scores.cols();
  std::vector<long double> q(n * k);
  // Plain-domain kernel with each row divided by its largest entry.
  for (std::size_t r = 0; r < n; ++r) {
    long double m = -1e300L;
    for (std::size_t c = 0; c < k; ++c) m = std::max(m, static_cast<long double>(scores(r, c)) / eps);
    for (std::size_t c = 0; c < k; ++c) q[r * k + c] = std::exp(static_cast<long double>(scores(r, c)) / eps - m);
  }
  for (std::size_t it = 0; it < iters; ++it) {
    for (std::size_t c = 0; c < k; ++c) {
      long double s = 0;
      for (std::size_t r = 0; r < n; ++r) s += q[r * k + c];
      for (std::size_t r = 0; r < n; ++r) q[r * k + c] /= s * k;
    }
    for (std::size_t r = 0; r < n; ++r) {
      long double s = 0;
      for (std::size_t c = 0; c < k; ++c) s += q[r * k + c];
      for (std::size_t c = 0; c < k; ++c) q[r * k + c] /= s * n;
    }
  }
  Matrix out(n, k);
  for (std::size_t i = 0; i < n * k; ++i) out.values()[i] = static_cast<double>(q[i]);
  return out;
}

TEST(Clustering, PrototypesHaveUnitRows) {
  Rng rng(1);
  Matrix c = init_prototypes(16, 8, rng);
  for (std::size_t r = 0; r < 16; ++r) {
    double sq = 0.0;
    for (double v : c.row(r)) sq += v * v;
    EXPECT_NEAR(sq, 1.0, 1e-14);
  }
  for (double& v : c.values()) v *= 3.0;
  renormalize_prototypes(c);
  for (std::size_t r = 0; r < 16; ++r) {
    double sq = 0.0;
    for (double v : c.row(r)) sq += v * v;
    EXPECT_NEAR(sq, 1.0, 1e-14);
  }
  EXPECT_THROW(init_prototypes(1, 8, rng), ConfigError);
}

TEST(Clustering, SinkhornMarginals) {
  Rng rng(2);
  const Matrix h = random_matrix(64, 10, rng);
  const Matrix c = init_prototypes(16, 10, rng);
  const Matrix q = sinkhorn_codes(h, c, 0.05, 6);
  for (std::size_t i = 0; i < 64; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 16; ++j) {
      EXPECT_GE(q(i, j), 0.0);
      s += q(i, j);
    }
    EXPECT_NEAR(s, 1.0 / 64.0, 1e-15);
  }
  // Six rounds leave ~1e-2 column error on unit-scale cosine scores at this
  // epsilon; the column marginal converges with more rounds.
  const Matrix converged = sinkhorn_codes(h, c, 0.05, 400);
  for (std::size_t j = 0; j < 16; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < 64; ++i) s += converged(i, j);
    EXPECT_NEAR(s, 1.0 / 16.0, 1e-6);
  }
}

TEST(Clustering, SinkhornMatchesPlainDomainOracle) {
  Rng rng(3);
  const Matrix scores = random_matrix(20, 6, rng, 0.3);
  for (std::size_t iters : {1u, 3u, 6u, 20u}) {
    const Matrix q = sinkhorn_from_scores(scores, 0.5, iters);
    EXPECT_LT(max_abs_diff(q, sinkhorn_oracle(scores, 0.5, iters)), 1e-14) << iters;
  }
}

TEST(Clustering, UniformScoresGiveUniformCodes) {
  const Matrix q = sinkhorn_from_scores(Matrix(12, 5, 0.7), 0.05, 6);
  for (double v : q.values()) EXPECT_NEAR(v, 1.0 / 60.0, 1e-12);
}

TEST(Clustering, SinkhornCodesUseCosineScores) {
  Rng rng(4);
  const Matrix h = random_matrix(10, 4, rng);
  const Matrix c = init_prototypes(3, 4, rng);
  Matrix scaled = h;
  for (std::size_t r = 0; r < 10; ++r)
    for (double& v : scaled.row(r)) v *= static_cast<double>(r + 1);
  EXPECT_LT(max_abs_diff(sinkhorn_codes(h, c, 0.1, 6), sinkhorn_codes(scaled, c, 0.1, 6)), 1e-15);
  EXPECT_THROW(sinkhorn_codes(h, init_prototypes(3, 5, rng), 0.1, 6), ShapeError);
}

TEST(Clustering, SinkhornRejectsBadSettings) {
  EXPECT_THROW(sinkhorn_from_scores(Matrix(2, 2), 0.0, 3), ConfigError);
  EXPECT_THROW(sinkhorn_from_scores(Matrix(2, 2), 0.1, 0), ConfigError);
}

TEST(Clustering, AssignProbabilitiesRowsSumToOne) {
  Rng rng(5);
  ad::Tape tape;
  const ad::Var h = tape.variable(random_matrix(7, 4, rng));
  const ad::Var c = tape.variable(init_prototypes(5, 4, rng));
  const Matrix p = assign_probabilities(h, c, 0.1).value();
  for (std::size_t i = 0; i < 7; ++i) {
    double s = 0.0;
    for (double v : p.row(i)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-14);
  }
}

TEST(Clustering, AssignProbabilitiesGradient) {
  Rng rng(6);
  const Matrix h = random_matrix(5, 3, rng);
  const Matrix c = init_prototypes(4, 3, rng);
  const Matrix w = random_matrix(5, 4, rng);
  const double err = ad::finite_diff_check(
      [&](ad::Tape& t, const std::vector<ad::Var>& v) {
        return ad::sum(ad::mul(assign_probabilities(v[0], v[1], 0.5), t.constant(w)));
      },
      {h, c});
  EXPECT_LT(err, 1e-6);
}

TEST(Clustering, OtPairSets) {
  const std::vector<std::pair<std::size_t, std::size_t>> aug{{0, 2}, {1, 3}};
  EXPECT_EQ(ot_pairs(4, aug, OtPairs::kFull).size(), 6u);
  const auto self = ot_pairs(4, aug, OtPairs::kSelfOnly);
  ASSERT_EQ(self.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(self[i], std::make_pair(i, i));
  EXPECT_EQ(ot_pairs(4, aug, OtPairs::kAugOnly), aug);
}

TEST(Clustering, AlignmentLossHandValue) {
  ad::Tape tape;
  const ad::Var p = tape.variable(Matrix::from_rows({{0.25, 0.75}, {0.5, 0.5}}));
  // Row 1 of Q sums to 0.4; its normalized row is (0.25, 0.75).
  const Matrix q = Matrix::from_rows({{0.3, 0.2}, {0.1, 0.3}});
  const std::vector<std::pair<std::size_t, std::size_t>> pairs{{0, 0}, {1, 0}, {0, 1}};
  const double want = -(0.6 * std::log(0.25) + 0.4 * std::log(0.75) +
                        0.25 * std::log(0.25) + 0.75 * std::log(0.75) +
                        0.6 * std::log(0.5) + 0.4 * std::log(0.5)) /
                      3.0;
  EXPECT_NEAR(ot_alignment_loss(p, q, pairs).item(), want, 1e-14);
  EXPECT_THROW(ot_alignment_loss(p, q, {}), ConfigError);
}

TEST(Clustering, AlignmentLossGradientReachesOnlyP) {
  Rng rng(7);
  ad::Tape tape;
  const ad::Var logits = tape.variable(random_matrix(4, 3, rng));
  const ad::Var p = ad::row_softmax(logits);
  const Matrix q = sinkhorn_from_scores(random_matrix(4, 3, rng), 0.5, 3);
  const auto pairs = ot_pairs(4, std::vector<std::pair<std::size_t, std::size_t>>{{0, 2}, {1, 3}},
                              OtPairs::kFull);
  const auto g = tape.backward(ot_alignment_loss(p, q, pairs));
  EXPECT_GT(g.norm(logits), 0.0);
}

}  // namespace
}  // namespace exgrg
