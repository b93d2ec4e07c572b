#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "exgrg/graph.hpp"
#include "exgrg/matrix.hpp"

namespace exgrg {

struct ProbeConfig {
  std::vector<double> l2_grid{1e-4, 1e-3, 1e-2, 1e-1, 1.0};
  std::size_t max_iterations = 300;
  /// Stop when the gradient's max-abs entry falls below this.
  double tolerance = 1e-6;
  std::size_t trials = 20;
  double train_ratio = 0.1;
  double val_ratio = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Random train/val/test split by ratios; test takes the remainder.
Split random_split(std::size_t num_nodes, double train_ratio, double val_ratio, Rng& rng);

/// Multinomial logistic regression on standardized features.
class LogisticRegression {
 public:
  /// Full-batch accelerated gradient descent on mean cross-entropy + (l2/2)||W||^2.
  void fit(const Matrix& x, const std::vector<int>& y, int num_classes, double l2,
           std::size_t max_iterations, double tolerance);
  std::vector<int> predict(const Matrix& x) const;

  const Matrix& weights() const noexcept { return w_; }

 private:
  Matrix w_;  // (D + 1) x C, last row is the bias
  std::vector<double> mean_;
  std::vector<double> scale_;
};

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

struct TrialResult {
  double test_accuracy = 0.0;
  double val_accuracy = 0.0;
  double l2 = 0.0;
};

/// Picks the penalty with the best validation accuracy (first in grid order on
/// ties) and reports its test accuracy.
TrialResult probe_split(const Matrix& features, const std::vector<int>& labels, int num_classes,
                        const Split& split, const ProbeConfig& cfg);

struct ProbeResult {
  std::vector<TrialResult> trials;
  double mean = 0.0;
  double stddev = 0.0;
  /// Random splits discarded because a class was missing from the training part.
  std::size_t redraws = 0;
};

/// Runs cfg.trials trials on fresh random splits, or once on `fixed` when given.
ProbeResult linear_probe(const Matrix& features, const std::vector<int>& labels, int num_classes,
                         const ProbeConfig& cfg, const std::optional<Split>& fixed = std::nullopt);

/// Mean of squared off-diagonal entries of the 1/(N-1) covariance; 0 for one column.
double metric_corr(const Matrix& x);
/// Mean per-column standard deviation with the 1/(N-1) denominator.
double metric_std(const Matrix& x);
/// metric_std of the row-L2-normalized matrix.
double metric_nstd(const Matrix& x);
/// Singular values above tol * sigma_max, from the Gram-matrix spectrum.
std::size_t metric_rank(const Matrix& x, double tol = 1e-7);

struct MetricsReport {
  double corr_h = 0.0;
  double corr_z = 0.0;
  double std_h = 0.0;
  double std_z = 0.0;
  double nstd_h = 0.0;
  std::size_t rank_h = 0;
  std::size_t rank_z = 0;
};

MetricsReport compute_metrics(const Matrix& h, const Matrix& z);

}  // namespace exgrg
