#include "exgrg/optimizer.hpp"

#include <cmath>
#include <string>

#include "exgrg/error.hpp"

namespace exgrg {

Optimizer::Optimizer(OptimizerKind kind, double lr, double weight_decay)
    : kind_(kind), lr_(lr), weight_decay_(weight_decay) {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("optimizer: learning rate must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("optimizer: weight decay must be >= 0");
}

void Optimizer::restore(std::vector<Matrix> m, std::vector<Matrix> v, std::uint64_t step) {
  if (m.size() != v.size()) throw DataError("optimizer: moment lists differ in length");
  m_ = std::move(m);
  v_ = std::move(v);
  step_ = step;
}

void Optimizer::step(nn::ParameterStore& store, const std::vector<Matrix>& grads) {
  if (grads.size() != store.size())
    throw ShapeError("optimizer: " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(store.size()) + " parameters");
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (!store[i].trainable) continue;
    if (!grads[i].same_shape(store[i].value))
      throw ShapeError("optimizer: gradient shape mismatch for '" + store[i].name + "'");
    if (!grads[i].all_finite())
      throw NumericError("optimizer: non-finite gradient for '" + store[i].name + "'");
  }
  if (m_.empty()) {
    for (const auto& p : store) {
      m_.emplace_back(p.value.rows(), p.value.cols());
      v_.emplace_back(p.value.rows(), p.value.cols());
    }
  }
  if (m_.size() != store.size()) throw ShapeError("optimizer: state does not match the parameters");

  ++step_;
  const double t = static_cast<double>(step_);
  const double correction1 = 1.0 - std::pow(kBeta1, t);
  const double correction2 = 1.0 - std::pow(kBeta2, t);
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (!store[i].trainable) continue;
    auto& value = store[i].value.values();
    auto& m = m_[i].values();
    auto& v = v_[i].values();
    const auto& g = grads[i].values();
    for (std::size_t e = 0; e < value.size(); ++e) {
      if (kind_ == OptimizerKind::kAdamW) value[e] -= lr_ * weight_decay_ * value[e];
      m[e] = kBeta1 * m[e] + (1.0 - kBeta1) * g[e];
      v[e] = kBeta2 * v[e] + (1.0 - kBeta2) * g[e] * g[e];
      const double m_hat = m[e] / correction1;
      const double v_hat = v[e] / correction2;
      value[e] -= lr_ * m_hat / (std::sqrt(v_hat) + kEpsilon);
    }
  }
}

}  // namespace exgrg
