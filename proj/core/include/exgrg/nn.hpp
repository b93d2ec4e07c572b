#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "exgrg/autodiff.hpp"
#include "exgrg/graph.hpp"
#include "exgrg/matrix.hpp"
#include "exgrg/sparse.hpp"

namespace exgrg::nn {

enum class Activation { kIdentity, kRelu, kPrelu, kElu };
enum class Norm { kNone, kBatchNorm };

Activation parse_activation(std::string_view name);
Norm parse_norm(std::string_view name);
std::string_view to_string(Activation a);
std::string_view to_string(Norm n);

struct Parameter {
  std::string name;
  Matrix value;
  bool trainable = true;
};

/// Ordered, named collection of every parameter of a model.
class ParameterStore {
 public:
  std::size_t add(std::string name, Matrix value, bool trainable = true);
  /// Index of `name`; throws DataError when absent.
  std::size_t index_of(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::size_t size() const noexcept { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }

  auto begin() noexcept { return params_.begin(); }
  auto end() noexcept { return params_.end(); }
  auto begin() const noexcept { return params_.begin(); }
  auto end() const noexcept { return params_.end(); }

 private:
  std::vector<Parameter> params_;
};

/// The parameters of a store placed on one tape as leaves.
class Binding {
 public:
  /// Trainable parameters become gradient-receiving leaves unless `freeze_all`.
  Binding(ad::Tape& tape, const ParameterStore& store, bool freeze_all = false);
  /// Wraps existing leaves, index-aligned with a store. All must live on `tape`.
  Binding(ad::Tape& tape, std::vector<ad::Var> vars);

  const ad::Var& operator[](std::size_t i) const { return vars_[i]; }
  std::size_t size() const noexcept { return vars_.size(); }
  ad::Tape& tape() const noexcept { return *tape_; }

 private:
  ad::Tape* tape_;
  std::vector<ad::Var> vars_;
};

/// Glorot-uniform fan_in x fan_out matrix with bound sqrt(6 / (fan_in + fan_out)).
Matrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// D^-1/2 (A + I) D^-1/2 with D the degree matrix of A + I.
SparseMatrix normalize_adjacency(const SparseMatrix& adjacency);

/// Applies norm then activation; `slope` is consulted for PReLU only.
ad::Var apply_norm_activation(const ad::Var& x, Norm norm, Activation act,
                              const std::optional<ad::Var>& slope);

struct GcnLayer {
  std::size_t weight = 0;
  std::optional<std::size_t> slope;
  Activation activation = Activation::kRelu;
  Norm norm = Norm::kBatchNorm;
};

/// Stack of GCN layers: H <- act(norm(A_hat H W)).
class GcnEncoder {
 public:
  GcnEncoder() = default;
  /// dims = {D_in, hidden..., D_H}.
  GcnEncoder(ParameterStore& store, const std::string& prefix, const std::vector<std::size_t>& dims,
             Activation activation, Norm norm, Rng& rng);

  /// First layer multiplies the (constant, possibly sparse) features directly.
  ad::Var forward(const Binding& params, const SparseMatrix& norm_adj,
                  const SparseMatrix& features) const;
  ad::Var forward(const Binding& params, const SparseMatrix& norm_adj, const ad::Var& x) const;

  const std::vector<GcnLayer>& layers() const noexcept { return layers_; }
  std::size_t output_dim() const noexcept { return output_dim_; }

 private:
  ad::Var finish_layer(const Binding& params, const GcnLayer& layer, const ad::Var& pre) const;

  std::vector<GcnLayer> layers_;
  std::size_t output_dim_ = 0;
};

struct DenseLayer {
  std::size_t weight = 0;
  std::size_t bias = 0;
  std::optional<std::size_t> slope;
  Activation activation = Activation::kIdentity;
  Norm norm = Norm::kNone;
};

/// Multi-layer perceptron. Hidden layers are linear -> norm -> activation;
/// the last layer is linear unless `activate_output`.
class Mlp {
 public:
  Mlp() = default;
  /// dims = {in, hidden..., out}.
  Mlp(ParameterStore& store, const std::string& prefix, const std::vector<std::size_t>& dims,
      Activation activation, Norm norm, Rng& rng, bool activate_output = false,
      bool trainable = true);

  ad::Var forward(const Binding& params, const ad::Var& x) const;

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t output_dim() const noexcept { return output_dim_; }

 private:
  std::vector<DenseLayer> layers_;
  std::size_t input_dim_ = 0;
  std::size_t output_dim_ = 0;
};

}  // namespace exgrg::nn
