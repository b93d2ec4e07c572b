#include "exgrg/nn.hpp"

#include <cmath>

#include "exgrg/error.hpp"

namespace exgrg::nn {

Activation parse_activation(std::string_view name) {
  if (name == "identity" || name == "none") return Activation::kIdentity;
  if (name == "relu") return Activation::kRelu;
  if (name == "prelu") return Activation::kPrelu;
  if (name == "elu") return Activation::kElu;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

Norm parse_norm(std::string_view name) {
  if (name == "none") return Norm::kNone;
  if (name == "bn" || name == "batch_norm") return Norm::kBatchNorm;
  throw ConfigError("unknown normalization '" + std::string(name) + "'");
}

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kRelu: return "relu";
    case Activation::kPrelu: return "prelu";
    case Activation::kElu: return "elu";
  }
  return "identity";
}

std::string_view to_string(Norm n) { return n == Norm::kBatchNorm ? "bn" : "none"; }

std::size_t ParameterStore::add(std::string name, Matrix value, bool trainable) {
  if (contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  params_.push_back({std::move(name), std::move(value), trainable});
  return params_.size() - 1;
}

std::size_t ParameterStore::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return i;
  throw DataError("no parameter named '" + std::string(name) + "'");
}

bool ParameterStore::contains(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name == name) return true;
  return false;
}

Binding::Binding(ad::Tape& tape, const ParameterStore& store, bool freeze_all) : tape_(&tape) {
  vars_.reserve(store.size());
  for (const auto& p : store) {
    vars_.push_back(p.trainable && !freeze_all ? tape.variable(p.value, p.name)
                                               : tape.constant(p.value, p.name));
  }
}

Binding::Binding(ad::Tape& tape, std::vector<ad::Var> vars) : tape_(&tape), vars_(std::move(vars)) {
  for (const auto& v : vars_)
    if (v.tape() != &tape) throw ShapeError("Binding: leaf recorded on a different tape");
}

Matrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix w(fan_in, fan_out);
  for (double& v : w.values()) v = dist(rng);
  return w;
}

SparseMatrix normalize_adjacency(const SparseMatrix& adjacency) {
  const std::size_t n = adjacency.rows();
  if (adjacency.cols() != n) throw ShapeError("normalize_adjacency: matrix is not square");
  std::vector<Triplet> t;
  t.reserve(adjacency.nnz() + n);
  std::vector<double> degree(n, 1.0);
  for (std::size_t r = 0; r < n; ++r) {
    const auto cols = adjacency.row_cols(r);
    const auto vals = adjacency.row_values(r);
    for (std::size_t p = 0; p < cols.size(); ++p) {
      if (cols[p] == r) continue;
      degree[r] += vals[p];
      t.push_back({r, cols[p], vals[p]});
    }
    t.push_back({r, r, 1.0});
  }
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(degree[i]);
  for (auto& e : t) e.value *= inv_sqrt[e.row] * inv_sqrt[e.col];
  return SparseMatrix::from_triplets(n, n, std::move(t));
}

ad::Var apply_norm_activation(const ad::Var& x, Norm norm, Activation act,
                              const std::optional<ad::Var>& slope) {
  ad::Var h = norm == Norm::kBatchNorm ? ad::batch_norm(x) : x;
  switch (act) {
    case Activation::kIdentity: return h;
    case Activation::kRelu: return ad::relu(h);
    case Activation::kElu: return ad::elu(h);
    case Activation::kPrelu:
      if (!slope) throw ConfigError("prelu layer without a slope parameter");
      return ad::prelu(h, *slope);
  }
  return h;
}

namespace {
constexpr double kPreluInit = 0.25;
}

GcnEncoder::GcnEncoder(ParameterStore& store, const std::string& prefix,
                       const std::vector<std::size_t>& dims, Activation activation, Norm norm,
                       Rng& rng) {
  if (dims.size() < 2) throw ConfigError("GcnEncoder: need at least input and output dims");
  for (std::size_t d : dims)
    if (d == 0) throw ConfigError("GcnEncoder: dimensions must be positive");
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    GcnLayer layer;
    const std::string base = prefix + ".layer" + std::to_string(l);
    layer.weight = store.add(base + ".weight", glorot_uniform(dims[l], dims[l + 1], rng));
    if (activation == Activation::kPrelu)
      layer.slope = store.add(base + ".prelu", Matrix(1, 1, kPreluInit));
    layer.activation = activation;
    layer.norm = norm;
    layers_.push_back(layer);
  }
  output_dim_ = dims.back();
}

ad::Var GcnEncoder::finish_layer(const Binding& params, const GcnLayer& layer,
                                 const ad::Var& pre) const {
  std::optional<ad::Var> slope;
  if (layer.slope) slope = params[*layer.slope];
  return apply_norm_activation(pre, layer.norm, layer.activation, slope);
}

ad::Var GcnEncoder::forward(const Binding& params, const SparseMatrix& norm_adj,
                            const SparseMatrix& features) const {
  if (layers_.empty()) throw ConfigError("GcnEncoder: no layers");
  if (features.rows() != norm_adj.rows())
    throw ShapeError("GcnEncoder: feature rows do not match adjacency");
  const ad::Var xw = ad::sparse_dense_matmul(features, params[layers_[0].weight]);
  ad::Var h = finish_layer(params, layers_[0], ad::sparse_dense_matmul(norm_adj, xw));
  for (std::size_t l = 1; l < layers_.size(); ++l) {
    const ad::Var hw = ad::matmul(h, params[layers_[l].weight]);
    h = finish_layer(params, layers_[l], ad::sparse_dense_matmul(norm_adj, hw));
  }
  return h;
}

ad::Var GcnEncoder::forward(const Binding& params, const SparseMatrix& norm_adj,
                            const ad::Var& x) const {
  if (x.rows() != norm_adj.rows()) throw ShapeError("GcnEncoder: input rows do not match adjacency");
  ad::Var h = x;
  for (const auto& layer : layers_) {
    const ad::Var hw = ad::matmul(h, params[layer.weight]);
    h = finish_layer(params, layer, ad::sparse_dense_matmul(norm_adj, hw));
  }
  return h;
}

Mlp::Mlp(ParameterStore& store, const std::string& prefix, const std::vector<std::size_t>& dims,
         Activation activation, Norm norm, Rng& rng, bool activate_output, bool trainable) {
  if (dims.size() < 2) throw ConfigError("Mlp: need at least input and output dims");
  for (std::size_t d : dims)
    if (d == 0) throw ConfigError("Mlp: dimensions must be positive");
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer layer;
    const std::string base = prefix + ".layer" + std::to_string(l);
    layer.weight = store.add(base + ".weight", glorot_uniform(dims[l], dims[l + 1], rng), trainable);
    layer.bias = store.add(base + ".bias", Matrix(1, dims[l + 1]), trainable);
    const bool last = l + 2 == dims.size();
    if (!last || activate_output) {
      layer.activation = activation;
      layer.norm = norm;
      if (activation == Activation::kPrelu)
        layer.slope = store.add(base + ".prelu", Matrix(1, 1, kPreluInit), trainable);
    }
    layers_.push_back(layer);
  }
  input_dim_ = dims.front();
  output_dim_ = dims.back();
}

ad::Var Mlp::forward(const Binding& params, const ad::Var& x) const {
  if (x.cols() != input_dim_) throw ShapeError("Mlp: input width does not match first layer");
  ad::Var h = x;
  for (const auto& layer : layers_) {
    h = ad::add(ad::matmul(h, params[layer.weight]), params[layer.bias]);
    std::optional<ad::Var> slope;
    if (layer.slope) slope = params[*layer.slope];
    h = apply_norm_activation(h, layer.norm, layer.activation, slope);
  }
  return h;
}

}  // namespace exgrg::nn
