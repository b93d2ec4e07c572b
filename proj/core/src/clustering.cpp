#include "exgrg/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "exgrg/error.hpp"

namespace exgrg {

Matrix init_prototypes(std::size_t k, std::size_t dim, Rng& rng) {
  if (k < 2) throw ConfigError("prototype count must be >= 2");
  if (dim == 0) throw ConfigError("prototype dimension must be >= 1");
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix c(k, dim);
  for (double& v : c.values()) v = normal(rng);
  renormalize_prototypes(c);
  return c;
}

void renormalize_prototypes(Matrix& c) {
  for (std::size_t r = 0; r < c.rows(); ++r) {
    auto row = c.row(r);
    double sq = 0.0;
    for (double v : row) sq += v * v;
    if (sq == 0.0) throw NumericError("prototype row " + std::to_string(r) + " has zero norm");
    const double inv = 1.0 / std::sqrt(sq);
    for (double& v : row) v *= inv;
  }
}

ad::Var assign_probabilities(const ad::Var& h, const ad::Var& c, double tau) {
  if (!(tau > 0.0)) throw ConfigError("assignment temperature must be > 0");
  if (h.cols() != c.cols())
    throw ShapeError("assign_probabilities: representation width " + std::to_string(h.cols()) +
                     " != prototype width " + std::to_string(c.cols()));
  return ad::row_softmax(ad::matmul(ad::l2_normalize_rows(h), ad::transpose(c)), tau);
}

namespace {

double log_sum_exp(std::span<const double> xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

Matrix sinkhorn_from_scores(const Matrix& scores, double epsilon, std::size_t iterations) {
  if (!(epsilon > 0.0)) throw ConfigError("Sinkhorn epsilon must be > 0");
  if (iterations == 0) throw ConfigError("Sinkhorn iteration count must be >= 1");
  if (!scores.all_finite()) throw NumericError("sinkhorn: non-finite scores");
  const std::size_t n = scores.rows();
  const std::size_t k = scores.cols();
  if (n == 0 || k == 0) throw ShapeError("sinkhorn: empty score matrix");

  // log K = scores / epsilon, shifted by the row max for stability.
  Matrix log_kernel(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) m = std::max(m, scores(i, j) / epsilon);
    for (std::size_t j = 0; j < k; ++j) log_kernel(i, j) = scores(i, j) / epsilon - m;
  }
  const double log_row = -std::log(static_cast<double>(n));
  const double log_col = -std::log(static_cast<double>(k));
  std::vector<double> u(n, 0.0), v(k, 0.0), buf(std::max(n, k));
  for (std::size_t it = 0; it < iterations; ++it) {
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t i = 0; i < n; ++i) buf[i] = log_kernel(i, j) + u[i];
      v[j] = log_col - log_sum_exp({buf.data(), n});
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < k; ++j) buf[j] = log_kernel(i, j) + v[j];
      u[i] = log_row - log_sum_exp({buf.data(), k});
    }
  }
  Matrix q(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      q(i, j) = std::exp(log_kernel(i, j) + u[i] + v[j]);
      row_sum += q(i, j);
    }
    if (!(row_sum > 0.0) || !std::isfinite(row_sum))
      throw NumericError("sinkhorn: row " + std::to_string(i) +
                         " underflowed; increase the entropy weight epsilon (currently " +
                         std::to_string(epsilon) + ")");
  }
  return q;
}

Matrix sinkhorn_codes(const Matrix& h, const Matrix& c, double epsilon, std::size_t iterations) {
  if (h.cols() != c.cols())
    throw ShapeError("sinkhorn_codes: representation width " + std::to_string(h.cols()) +
                     " != prototype width " + std::to_string(c.cols()));
  return sinkhorn_from_scores(matmul_nt(l2_normalize_rows(h), c), epsilon, iterations);
}

std::vector<std::pair<std::size_t, std::size_t>> ot_pairs(
    std::size_t n, std::span<const std::pair<std::size_t, std::size_t>> augment_pairs,
    OtPairs mode) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (mode != OtPairs::kAugOnly)
    for (std::size_t i = 0; i < n; ++i) out.emplace_back(i, i);
  if (mode != OtPairs::kSelfOnly) out.insert(out.end(), augment_pairs.begin(), augment_pairs.end());
  return out;
}

ad::Var ot_alignment_loss(const ad::Var& p, const Matrix& q,
                          std::span<const std::pair<std::size_t, std::size_t>> pairs) {
  if (pairs.empty()) throw ConfigError("ot_alignment_loss: empty pair set");
  if (!p.value().same_shape(q)) throw ShapeError("ot_alignment_loss: P and Q shapes differ");
  const std::size_t n = q.rows();
  const std::size_t k = q.cols();
  // Target T_j = sum over pairs (i, j) of Qn_i / |S_O|, so the loss is -sum(T * log P).
  Matrix target(n, k);
  const double weight = 1.0 / static_cast<double>(pairs.size());
  std::vector<double> row_sum(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < k; ++c) row_sum[i] += q(i, c);
  for (const auto& [i, j] : pairs) {
    if (i >= n || j >= n) throw ShapeError("ot_alignment_loss: pair index out of range");
    if (!(row_sum[i] > 0.0)) throw NumericError("ot_alignment_loss: Q row with zero mass");
    for (std::size_t c = 0; c < k; ++c) target(j, c) += weight * q(i, c) / row_sum[i];
  }
  ad::Tape& tape = *p.tape();
  return ad::scalar_mul(ad::sum(ad::mul(tape.constant(std::move(target)), ad::log(p))), -1.0);
}

}  // namespace exgrg
