#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "exgrg/graph.hpp"
#include "exgrg/nn.hpp"

namespace exgrg {

enum class SimilarityMetric { kCosine, kNegEuclidean };
enum class SignNetArch { kMlp, kDeepSet };
enum class OtPairs { kFull, kSelfOnly, kAugOnly };
enum class OptimizerKind { kAdam, kAdamW };

struct LossWeights {
  double alpha = 100.0;   // variance
  double beta = 80.0;     // covariance
  double gamma = 5.0;     // relation-graph invariance
  double alpha1 = 0.2;    // optimal-transport alignment
  double alpha2 = 0.5;    // relation regularizer

  void validate() const;
};

struct EncoderConfig {
  nn::Activation activation = nn::Activation::kRelu;
  nn::Norm norm = nn::Norm::kBatchNorm;
  std::size_t layers = 2;
  std::size_t hidden = 1024;
  std::size_t out_dim = 1024;  // D_H
};

struct ExpanderConfig {
  nn::Activation activation = nn::Activation::kElu;
  nn::Norm norm = nn::Norm::kBatchNorm;
  std::size_t layers = 2;
  std::size_t hidden = 1024;
  std::size_t out_dim = 1024;  // D_Z
};

/// Aggregation hypernetwork. Inputs are (sum/N^2, count/N^2), each mapped
/// through (x - shift) / scale.
struct PsiConfig {
  bool enabled = true;  // false: uniform, fixed lambdas
  std::size_t layers = 4;
  std::size_t hidden_ratio = 2;
  nn::Activation activation = nn::Activation::kElu;
  double sum_shift = 0.0;
  double sum_scale = 0.05;
  double count_shift = 0.0;
  double count_scale = 0.05;
};

/// Which generators join the aggregated relation graph.
struct GraphSelection {
  bool aug = true;
  bool adj = false;
  bool adj_filtered = true;
  bool lappe = true;
  bool rwse = true;
  bool signnet = true;
  bool cluster = true;
};

struct RelGraphConfig {
  bool intra = true;  // false: only cross-view pairs
  SimilarityMetric knn_metric = SimilarityMetric::kCosine;
  SimilarityMetric pse_metric = SimilarityMetric::kCosine;
  std::size_t knn_k = 32;
  bool knn_standalone = false;
  std::size_t lappe_k = 8;
  std::size_t lappe_freq = 32;
  std::size_t rwse_k = 80;
  std::size_t rwse_kernel = 24;
  bool rwse_filtered = false;
  std::size_t signnet_k = 4;
  std::size_t signnet_freq = 10;
  SignNetArch signnet_arch = SignNetArch::kDeepSet;
  std::size_t signnet_hidden = 16;
  std::size_t signnet_out = 16;
  bool signnet_trainable = false;  // removes the stop-gradient on G^S
  bool binary = false;             // threshold aggregated weights at 0.5
  GraphSelection use;
};

struct PseConfig {
  bool normalized_laplacian = true;
  std::size_t rwse_exact_limit = 5000;
  std::size_t rwse_walks = 2000;  // Monte-Carlo walks per node above the limit
};

struct ClusterConfig {
  std::size_t prototypes = 64;  // K
  double tau = 0.1;
  double epsilon = 0.05;
  std::size_t sinkhorn_iters = 6;
  double kg_ratio = 12.0;  // K_g / N
  bool global_topk = true;  // false: row-wise top-(K_g/N)
  OtPairs pairs = OtPairs::kFull;
};

struct TrainConfig {
  std::uint64_t seed = 0;
  std::size_t iterations = 5000;
  std::size_t batch_size = 3072;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double lr = 5e-4;
  double weight_decay = 0.01;
  std::size_t checkpoint_every = 0;  // 0 disables periodic checkpoints

  LossWeights weights;
  EncoderConfig encoder;
  ExpanderConfig expander;
  PsiConfig psi;
  AugmentConfig view1{0.2, 0.3};
  AugmentConfig view2{0.4, 0.4};
  RelGraphConfig relgraph;
  PseConfig pse;
  ClusterConfig cluster;

  /// Throws ConfigError naming the offending key.
  void validate() const;
};

/// Applies one `key = value` assignment. Unknown keys throw ConfigError.
void set_config_value(TrainConfig& cfg, std::string_view key, std::string_view value);

/// Every recognised key, in canonical order.
std::vector<std::string> config_keys();

/// Parses `key = value` lines; '#' starts a comment. Errors carry `origin:line`.
TrainConfig parse_config(std::string_view text, const TrainConfig& base = {},
                         std::string_view origin = "<config>");
TrainConfig load_config(const std::filesystem::path& path, const TrainConfig& base = {});

/// Canonical text form; parse_config(to_string(c)) reproduces c exactly.
std::string to_string(const TrainConfig& cfg);

std::string_view to_string(SimilarityMetric m);
std::string_view to_string(SignNetArch a);
std::string_view to_string(OtPairs p);
std::string_view to_string(OptimizerKind o);

}  // namespace exgrg
