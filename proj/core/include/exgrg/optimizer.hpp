#pragma once

#include <cstdint>
#include <vector>

#include "exgrg/config.hpp"
#include "exgrg/matrix.hpp"
#include "exgrg/nn.hpp"

namespace exgrg {

/// Adam / AdamW with beta1 = 0.9, beta2 = 0.999, eps = 1e-8 and bias correction.
/// AdamW applies decoupled weight decay p <- p - lr * wd * p before the moment step.
class Optimizer {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  Optimizer() = default;
  Optimizer(OptimizerKind kind, double lr, double weight_decay = 0.01);

  /// `grads` is index-aligned with `store`; frozen parameters are skipped.
  /// A non-finite gradient aborts the whole step with NumericError before any update.
  void step(nn::ParameterStore& store, const std::vector<Matrix>& grads);

  std::uint64_t steps() const noexcept { return step_; }
  const std::vector<Matrix>& first_moments() const noexcept { return m_; }
  const std::vector<Matrix>& second_moments() const noexcept { return v_; }
  /// Restores moments and step count (from a checkpoint).
  void restore(std::vector<Matrix> m, std::vector<Matrix> v, std::uint64_t step);

  OptimizerKind kind() const noexcept { return kind_; }
  double learning_rate() const noexcept { return lr_; }

 private:
  OptimizerKind kind_ = OptimizerKind::kAdam;
  double lr_ = 1e-3;
  double weight_decay_ = 0.01;
  std::uint64_t step_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

}  // namespace exgrg
