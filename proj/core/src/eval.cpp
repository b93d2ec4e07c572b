#include "exgrg/eval.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "exgrg/error.hpp"

namespace exgrg {

void ProbeConfig::validate() const {
  if (l2_grid.empty()) throw ConfigError("probe: empty L2 penalty grid");
  for (double l : l2_grid)
    if (!(l > 0.0) || !std::isfinite(l)) throw ConfigError("probe: L2 penalties must be > 0");
  if (max_iterations == 0) throw ConfigError("probe: max_iterations must be >= 1");
  if (trials == 0) throw ConfigError("probe: trials must be >= 1");
  if (!(train_ratio > 0.0) || !(val_ratio > 0.0) || train_ratio + val_ratio >= 1.0)
    throw ConfigError("probe: split ratios must be positive and leave room for a test part");
}

Split random_split(std::size_t num_nodes, double train_ratio, double val_ratio, Rng& rng) {
  std::vector<std::size_t> order(num_nodes);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(train_ratio * num_nodes));
  const auto n_val = static_cast<std::size_t>(std::llround(val_ratio * num_nodes));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= num_nodes)
    throw ConfigError("random_split: " + std::to_string(num_nodes) +
                      " nodes are too few for the requested ratios");
  Split s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
               order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return s;
}

namespace {

// Standardized features with a trailing bias column of ones.
Matrix design_matrix(const Matrix& x, const std::vector<double>& mean,
                     const std::vector<double>& scale) {
  const std::size_t d = x.cols();
  Matrix out(x.rows(), d + 1);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < d; ++c) out(r, c) = (x(r, c) - mean[c]) / scale[c];
    out(r, d) = 1.0;
  }
  return out;
}

void softmax_rows(Matrix& logits) {
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    const double m = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double& v : row) {
      v = std::exp(v - m);
      s += v;
    }
    for (double& v : row) v /= s;
  }
}

// Largest eigenvalue of X^T X / n by power iteration.
double gram_spectral_bound(const Matrix& x) {
  const std::size_t d = x.cols();
  Matrix v(d, 1, 1.0 / std::sqrt(static_cast<double>(d)));
  double lambda = 0.0;
  for (int it = 0; it < 50; ++it) {
    Matrix w = matmul_tn(x, matmul(x, v));
    double norm = frobenius_norm(w);
    if (norm == 0.0) return 0.0;
    lambda = norm / static_cast<double>(x.rows());
    for (double& e : w.values()) e /= norm;
    v = std::move(w);
  }
  return lambda;
}

}  // namespace

void LogisticRegression::fit(const Matrix& x, const std::vector<int>& y, int num_classes,
                             double l2, std::size_t max_iterations, double tolerance) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (n == 0 || y.size() != n) throw ShapeError("LogisticRegression: label count mismatch");
  if (num_classes < 1) throw ShapeError("LogisticRegression: need at least one class");
  mean_.assign(d, 0.0);
  scale_.assign(d, 1.0);
  for (std::size_t c = 0; c < d; ++c) {
    double m = 0.0;
    for (std::size_t r = 0; r < n; ++r) m += x(r, c);
    m /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t r = 0; r < n; ++r) var += (x(r, c) - m) * (x(r, c) - m);
    var /= static_cast<double>(n);
    mean_[c] = m;
    scale_[c] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  const Matrix xt = design_matrix(x, mean_, scale_);
  const std::size_t k = static_cast<std::size_t>(num_classes);
  Matrix onehot(n, k);
  for (std::size_t r = 0; r < n; ++r) {
    if (y[r] < 0 || y[r] >= num_classes) throw ShapeError("LogisticRegression: label out of range");
    onehot(r, static_cast<std::size_t>(y[r])) = 1.0;
  }
  // Softmax cross-entropy has curvature at most 1/2 per unit of ||x||^2.
  const double lipschitz = 0.5 * 1.1 * gram_spectral_bound(xt) + l2;
  const double step = 1.0 / lipschitz;

  w_ = Matrix(d + 1, k);
  Matrix w_prev = w_;
  Matrix look = w_;
  double t = 1.0;
  for (std::size_t it = 0; it < max_iterations; ++it) {
    Matrix probs = matmul(xt, look);
    softmax_rows(probs);
    for (std::size_t e = 0; e < probs.size(); ++e) probs.values()[e] -= onehot.values()[e];
    Matrix grad = matmul_tn(xt, probs);
    for (double& g : grad.values()) g /= static_cast<double>(n);
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t c = 0; c < k; ++c) grad(r, c) += l2 * look(r, c);
    double gmax = 0.0;
    for (double g : grad.values()) gmax = std::max(gmax, std::abs(g));
    w_prev = w_;
    w_ = look;
    for (std::size_t e = 0; e < w_.size(); ++e) w_.values()[e] -= step * grad.values()[e];
    if (gmax < tolerance) break;
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double momentum = (t - 1.0) / t_next;
    for (std::size_t e = 0; e < w_.size(); ++e)
      look.values()[e] = w_.values()[e] + momentum * (w_.values()[e] - w_prev.values()[e]);
    t = t_next;
  }
}

std::vector<int> LogisticRegression::predict(const Matrix& x) const {
  if (x.cols() + 1 != w_.rows()) throw ShapeError("LogisticRegression: feature width mismatch");
  const Matrix logits = matmul(design_matrix(x, mean_, scale_), w_);
  std::vector<int> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = logits.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size() || truth.empty())
    throw ShapeError("accuracy: size mismatch or empty input");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

namespace {

std::vector<int> pick_labels(const std::vector<int>& labels, const std::vector<std::size_t>& idx) {
  std::vector<int> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = labels[idx[i]];
  return out;
}

bool covers_all_classes(const std::vector<int>& labels, const std::vector<std::size_t>& idx,
                        int num_classes) {
  std::vector<bool> seen(static_cast<std::size_t>(num_classes), false);
  for (std::size_t i : idx) seen[static_cast<std::size_t>(labels[i])] = true;
  return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

}  // namespace

TrialResult probe_split(const Matrix& features, const std::vector<int>& labels, int num_classes,
                        const Split& split, const ProbeConfig& cfg) {
  cfg.validate();
  if (labels.size() != features.rows()) throw ShapeError("probe: one label per node required");
  if (split.train.empty() || split.val.empty() || split.test.empty())
    throw DataError("probe: every split part must be non-empty");
  const Matrix x_train = gather_rows(features, split.train);
  const Matrix x_val = gather_rows(features, split.val);
  const Matrix x_test = gather_rows(features, split.test);
  const std::vector<int> y_train = pick_labels(labels, split.train);
  const std::vector<int> y_val = pick_labels(labels, split.val);
  const std::vector<int> y_test = pick_labels(labels, split.test);

  TrialResult best;
  best.val_accuracy = -1.0;
  for (double l2 : cfg.l2_grid) {
    LogisticRegression model;
    model.fit(x_train, y_train, num_classes, l2, cfg.max_iterations, cfg.tolerance);
    const double val = accuracy(model.predict(x_val), y_val);
    if (val > best.val_accuracy) {
      best.val_accuracy = val;
      best.l2 = l2;
      best.test_accuracy = accuracy(model.predict(x_test), y_test);
    }
  }
  return best;
}

ProbeResult linear_probe(const Matrix& features, const std::vector<int>& labels, int num_classes,
                         const ProbeConfig& cfg, const std::optional<Split>& fixed) {
  cfg.validate();
  ProbeResult result;
  if (fixed) {
    result.trials.push_back(probe_split(features, labels, num_classes, *fixed, cfg));
  } else {
    constexpr std::size_t kMaxRedraws = 1000;
    for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
      Rng rng = derive_rng(cfg.seed, trial);
      Split split = random_split(features.rows(), cfg.train_ratio, cfg.val_ratio, rng);
      std::size_t attempts = 0;
      while (!covers_all_classes(labels, split.train, num_classes)) {
        if (++attempts > kMaxRedraws)
          throw DataError("probe: could not draw a training split containing every class");
        ++result.redraws;
        split = random_split(features.rows(), cfg.train_ratio, cfg.val_ratio, rng);
      }
      result.trials.push_back(probe_split(features, labels, num_classes, split, cfg));
    }
  }
  double sum = 0.0;
  for (const auto& t : result.trials) sum += t.test_accuracy;
  result.mean = sum / static_cast<double>(result.trials.size());
  double sq = 0.0;
  for (const auto& t : result.trials) sq += (t.test_accuracy - result.mean) * (t.test_accuracy - result.mean);
  result.stddev = std::sqrt(sq / static_cast<double>(result.trials.size()));
  return result;
}

namespace {

Matrix covariance_matrix(const Matrix& x) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (n < 2) throw ShapeError("metrics need at least two rows");
  std::vector<double> mean(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) mean[c] += x(r, c);
  for (double& m : mean) m /= static_cast<double>(n);
  Matrix centered(n, d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) centered(r, c) = x(r, c) - mean[c];
  Matrix cov = matmul_tn(centered, centered);
  for (double& v : cov.values()) v /= static_cast<double>(n - 1);
  return cov;
}

}  // namespace

double metric_corr(const Matrix& x) {
  const std::size_t d = x.cols();
  if (x.empty()) throw ShapeError("metric_corr: empty matrix");
  if (d < 2) return 0.0;
  const Matrix cov = covariance_matrix(x);
  double acc = 0.0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      if (i != j) acc += cov(i, j) * cov(i, j);
  return acc / static_cast<double>(d * (d - 1));
}

double metric_std(const Matrix& x) {
  if (x.empty()) throw ShapeError("metric_std: empty matrix");
  const Matrix cov = covariance_matrix(x);
  double acc = 0.0;
  for (std::size_t c = 0; c < x.cols(); ++c) acc += std::sqrt(std::max(0.0, cov(c, c)));
  return acc / static_cast<double>(x.cols());
}

double metric_nstd(const Matrix& x) { return metric_std(l2_normalize_rows(x)); }

std::size_t metric_rank(const Matrix& x, double tol) {
  if (x.empty()) throw ShapeError("metric_rank: empty matrix");
  using LongMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  // Gram matrix of the smaller side, accumulated in extended precision so
  // the squared spectrum resolves singular values down to tol * sigma_max.
  const bool by_cols = x.cols() <= x.rows();
  const std::size_t m = by_cols ? x.cols() : x.rows();
  const std::size_t len = by_cols ? x.rows() : x.cols();
  LongMat gram(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a; b < m; ++b) {
      long double acc = 0.0L;
      for (std::size_t t = 0; t < len; ++t) {
        const long double u = by_cols ? x(t, a) : x(a, t);
        const long double v = by_cols ? x(t, b) : x(b, t);
        acc += u * v;
      }
      gram(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = acc;
      gram(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = acc;
    }
  }
  Eigen::SelfAdjointEigenSolver<LongMat> solver(gram, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericError("metric_rank: eigensolver failed");
  const auto& ev = solver.eigenvalues();
  long double sigma_max = 0.0L;
  for (Eigen::Index i = 0; i < ev.size(); ++i) sigma_max = std::max(sigma_max, std::sqrt(std::max(0.0L, ev(i))));
  if (sigma_max == 0.0L) return 0;
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (std::sqrt(std::max(0.0L, ev(i))) > static_cast<long double>(tol) * sigma_max) ++rank;
  return rank;
}

MetricsReport compute_metrics(const Matrix& h, const Matrix& z) {
  MetricsReport r;
  r.corr_h = metric_corr(h);
  r.corr_z = metric_corr(z);
  r.std_h = metric_std(h);
  r.std_z = metric_std(z);
  r.nstd_h = metric_nstd(h);
  r.rank_h = metric_rank(h);
  r.rank_z = metric_rank(z);
  return r;
}

}  // namespace exgrg
