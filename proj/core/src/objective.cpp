#include "exgrg/objective.hpp"

#include <cmath>
#include <string>

#include "exgrg/error.hpp"

namespace exgrg {

namespace {

constexpr double kVarianceEpsilon = 1e-4;

ad::Var covariance(const ad::Var& z) {
  if (z.rows() < 2) throw ShapeError("covariance needs at least two rows");
  const ad::Var centered = ad::sub(z, ad::column_mean(z));
  return ad::scalar_mul(ad::matmul(ad::transpose(centered), centered),
                        1.0 / static_cast<double>(z.rows() - 1));
}

}  // namespace

ad::Var variance_loss(const ad::Var& z) {
  const ad::Var std_dev = ad::sqrt(ad::diagonal(covariance(z)), kVarianceEpsilon);
  return ad::sum(ad::hinge(std_dev, 1.0));
}

ad::Var covariance_loss(const ad::Var& z) {
  const ad::Var c = covariance(z);
  return ad::sub(ad::sum(ad::square(c)), ad::sum(ad::square(ad::diagonal(c))));
}

ad::Var invariance_loss(const ad::Var& z, std::span<const IndexPair> pairs, const ad::Var& weights) {
  if (weights.rows() != 1 || weights.cols() != pairs.size())
    throw ShapeError("invariance_loss: weights must be 1 x " + std::to_string(pairs.size()));
  for (const auto& [i, j] : pairs)
    if (i >= z.rows() || j >= z.rows()) throw ShapeError("invariance_loss: pair index out of range");
  if (pairs.empty()) return z.tape()->constant(Matrix(1, 1));
  return ad::sum(ad::mul(weights, ad::pair_sq_dist(z, pairs)));
}

ad::Var invariance_loss(const ad::Var& z, const SparseMatrix& g) {
  if (g.rows() != z.rows() || g.cols() != z.rows())
    throw ShapeError("invariance_loss: relation matrix does not match the batch");
  std::vector<IndexPair> pairs;
  std::vector<double> w;
  for (const auto& t : g.triplets()) {
    pairs.emplace_back(t.row, t.col);
    w.push_back(t.value);
  }
  const std::size_t count = w.size();
  return invariance_loss(z, pairs, z.tape()->constant(Matrix(1, count, std::move(w))));
}

ad::Var relation_regularizer(const ad::Var& weights) {
  if (weights.cols() == 0) return weights.tape()->constant(Matrix(1, 1));
  return ad::scalar_mul(ad::sum(ad::square(weights)), -1.0);
}

TotalLoss total_loss(const LossInputs& in, const LossWeights& w) {
  w.validate();
  if (!in.q) throw ShapeError("total_loss: missing Sinkhorn codes");
  const ad::Var lv = variance_loss(in.z);
  const ad::Var lc = covariance_loss(in.z);
  const ad::Var li = invariance_loss(in.z, in.pairs, in.g_weights);
  const ad::Var lo = ot_alignment_loss(in.p, *in.q, in.ot_pairs);
  const ad::Var lr = relation_regularizer(in.g_weights);

  TotalLoss out;
  out.report.variance = lv.item();
  out.report.covariance = lc.item();
  out.report.invariance = li.item();
  out.report.alignment = lo.item();
  out.report.regularizer = lr.item();
  out.report.total = w.alpha * out.report.variance + w.beta * out.report.covariance +
                     w.gamma * out.report.invariance + w.alpha1 * out.report.alignment +
                     w.alpha2 * out.report.regularizer;

  const std::pair<double, ad::Var> terms[] = {
      {w.alpha, lv}, {w.beta, lc}, {w.gamma, li}, {w.alpha1, lo}, {w.alpha2, lr}};
  ad::Var acc;
  for (const auto& [weight, term] : terms) {
    if (weight == 0.0) continue;
    const ad::Var scaled = ad::scalar_mul(term, weight);
    acc = acc.valid() ? ad::add(acc, scaled) : scaled;
  }
  out.value = acc.valid() ? acc : in.z.tape()->constant(Matrix(1, 1));
  return out;
}

}  // namespace exgrg
