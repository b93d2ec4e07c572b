#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "exgrg/checkpoint.hpp"
#include "exgrg/clustering.hpp"
#include "exgrg/config.hpp"
#include "exgrg/graph.hpp"
#include "exgrg/nn.hpp"
#include "exgrg/objective.hpp"
#include "exgrg/optimizer.hpp"
#include "exgrg/pse.hpp"
#include "exgrg/relgraph.hpp"

namespace exgrg {

/// Every trainable component: encoder f_theta, expander g_phi, prototypes C,
/// aggregator Psi and the SignNet.
struct Model {
  nn::ParameterStore params;
  nn::GcnEncoder encoder;
  nn::Mlp expander;
  std::size_t prototypes = 0;  // index of C in params
  Aggregator aggregator;
  std::optional<SignNet> signnet;
};

/// Initializes parameters from cfg.seed.
Model build_model(const TrainConfig& cfg, std::size_t input_dim);

/// Copies every parameter of `model` from the checkpoint entry of the same
/// name. Throws DataError when an entry is missing or has the wrong shape.
void load_parameters(Model& model, const Checkpoint& ckpt);

/// Rebuilds the model described by a checkpoint's config and loads its parameters.
Model model_from_checkpoint(const Checkpoint& ckpt, std::size_t input_dim);

/// H = f_theta on the un-augmented source graph with frozen parameters (M x D_H).
Matrix encode_representations(const Model& model, const SourceGraph& g);
/// Z = g_phi(H) for all source nodes (M x D_Z).
Matrix encode_embeddings(const Model& model, const SourceGraph& g);

/// Encodings of the source graph computed once before training.
struct PrecomputedEncodings {
  std::optional<Encoding> lappe;
  std::optional<Encoding> rwse;
  /// Eigenvectors fed to the SignNet (M x freq).
  std::optional<Matrix> signnet_eigvecs;
  /// Frozen SignNet output; empty when the SignNet trains.
  std::optional<Encoding> signnet;
};

PrecomputedEncodings precompute_encodings(const SourceGraph& g, const TrainConfig& cfg,
                                          const Model& model);

/// Graphs entering aggregation, in lambda order.
std::vector<RelationKind> enabled_relations(const TrainConfig& cfg);

struct IterationRecord {
  /// 1-based: the record of the first update has iteration 1, matching ckpt_<t> names.
  std::uint64_t iteration = 0;
  LossReport loss;
  std::vector<double> lambdas;
  /// Mean column std of the batch embeddings Z before the update.
  double z_std = 0.0;
};

/// Everything built during one iteration's E-step, exposed for inspection.
struct EStepResult {
  MiniBatchIndex batch;
  std::vector<RelationGraph> graphs;
  Matrix h_batch;
  Matrix q;
};

/// Loss of one iteration and the gradient of every parameter (index-aligned
/// with Model::params; zero for frozen ones).
struct GradientReport {
  IterationRecord record;
  std::vector<Matrix> grads;
  /// False when every active loss term is off the tape (all weights zero).
  bool differentiable = false;
};

/// Metrics CSV header: iteration,L_V,L_C,L_Iprime,L_O,L_R,total,lambda_1..lambda_n.
std::string metrics_header(std::size_t num_lambdas);
std::string metrics_row(const IterationRecord& r);

/// Pre-training loop. Iteration t draws all randomness from derive_rng(seed, t),
/// so a run resumed at iteration t continues the uninterrupted trajectory.
class Trainer {
 public:
  Trainer(const SourceGraph& graph, TrainConfig cfg);

  /// Runs one joint E-step/M-step update and advances the iteration counter.
  IterationRecord step();
  /// Steps until iteration() == cfg.iterations; `on_record` sees every record.
  void run(const std::function<void(const IterationRecord&)>& on_record = {});

  /// E-step of the current iteration without updating anything.
  EStepResult inspect() const;
  /// Loss and gradients of the current iteration without updating anything.
  GradientReport gradients() const;

  std::uint64_t iteration() const noexcept { return iteration_; }
  const TrainConfig& config() const noexcept { return cfg_; }
  const Model& model() const noexcept { return model_; }
  Model& model() noexcept { return model_; }
  const Optimizer& optimizer() const noexcept { return optimizer_; }
  const PrecomputedEncodings& encodings() const noexcept { return encodings_; }

  Checkpoint checkpoint() const;
  /// Restores parameters, optimizer state and iteration. The checkpoint's
  /// parameter names and shapes must match this model.
  void restore(const Checkpoint& ckpt);

  /// H on the un-augmented source graph with frozen parameters (M x D_H).
  Matrix representations() const;
  /// Z = g_phi(H) for all source nodes (M x D_Z).
  Matrix embeddings() const;

 private:
  struct Forward;
  Forward forward(const nn::Binding& params, std::uint64_t t) const;

  const SourceGraph& graph_;
  TrainConfig cfg_;
  Model model_;
  PrecomputedEncodings encodings_;
  Optimizer optimizer_;
  std::uint64_t iteration_ = 0;
};

struct PretrainOptions {
  /// Checkpoints (every cfg.checkpoint_every iterations and at the end) go here when set.
  std::optional<std::filesystem::path> out_dir;
  /// Metrics CSV is streamed here when set.
  std::ostream* metrics = nullptr;
  /// Resume from this checkpoint when set.
  std::optional<std::filesystem::path> resume;
};

struct PretrainResult {
  Model model;
  std::vector<IterationRecord> trace;
};

PretrainResult pretrain(const SourceGraph& g, const TrainConfig& cfg,
                        const PretrainOptions& options = {});

}  // namespace exgrg
