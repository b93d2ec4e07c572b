#include "exgrg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>

#include "exgrg/error.hpp"
#include "exgrg/eval.hpp"
#include "exgrg/spectral.hpp"

namespace exgrg {

namespace {

// Stream reserved for parameter initialization; iterations use streams 0..T-1.
constexpr std::uint64_t kInitStream = std::numeric_limits<std::uint64_t>::max();

std::vector<std::size_t> layer_dims(std::size_t in, std::size_t hidden, std::size_t layers,
                                    std::size_t out) {
  std::vector<std::size_t> dims{in};
  for (std::size_t l = 1; l < layers; ++l) dims.push_back(hidden);
  dims.push_back(out);
  return dims;
}

bool needs_knn(const TrainConfig& cfg) {
  const auto& rg = cfg.relgraph;
  return rg.knn_standalone || rg.use.adj_filtered || (rg.use.rwse && rg.rwse_filtered);
}

std::vector<bool> isolated_nodes(const SourceGraph& g) {
  std::vector<bool> out(g.num_nodes());
  for (std::size_t i = 0; i < g.num_nodes(); ++i) out[i] = g.degree(i) == 0;
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const Matrix& checkpoint_entry(const std::unordered_map<std::string_view, const Matrix*>& by_name,
                               const std::string& name, const Matrix& like) {
  const auto it = by_name.find(name);
  if (it == by_name.end()) throw DataError("checkpoint is missing entry '" + name + "'");
  if (!it->second->same_shape(like))
    throw DataError("checkpoint entry '" + name + "' has shape " +
                    std::to_string(it->second->rows()) + "x" + std::to_string(it->second->cols()) +
                    ", model expects " + std::to_string(like.rows()) + "x" +
                    std::to_string(like.cols()));
  return *it->second;
}

std::unordered_map<std::string_view, const Matrix*> index_entries(const Checkpoint& ckpt) {
  std::unordered_map<std::string_view, const Matrix*> by_name;
  for (const auto& e : ckpt.entries) by_name.emplace(e.name, &e.value);
  return by_name;
}

}  // namespace

Model build_model(const TrainConfig& cfg, std::size_t input_dim) {
  cfg.validate();
  if (input_dim == 0) throw DataError("build_model: the graph has no feature columns");
  Rng rng = derive_rng(cfg.seed, kInitStream);
  Model m;
  m.encoder = nn::GcnEncoder(
      m.params, "encoder",
      layer_dims(input_dim, cfg.encoder.hidden, cfg.encoder.layers, cfg.encoder.out_dim),
      cfg.encoder.activation, cfg.encoder.norm, rng);
  m.expander = nn::Mlp(m.params, "expander",
                       layer_dims(cfg.encoder.out_dim, cfg.expander.hidden, cfg.expander.layers,
                                  cfg.expander.out_dim),
                       cfg.expander.activation, cfg.expander.norm, rng);
  m.prototypes = m.params.add(
      "prototypes", init_prototypes(cfg.cluster.prototypes, cfg.encoder.out_dim, rng));
  m.aggregator = Aggregator(m.params, cfg.psi, rng);
  if (cfg.relgraph.use.signnet) {
    const auto& rg = cfg.relgraph;
    m.signnet.emplace(m.params, "signnet", rg.signnet_freq, rg.signnet_hidden, rg.signnet_out,
                      rg.signnet_arch, rng, rg.signnet_trainable);
  }
  return m;
}

void load_parameters(Model& model, const Checkpoint& ckpt) {
  const auto by_name = index_entries(ckpt);
  std::vector<Matrix> values;
  for (const auto& p : model.params) values.push_back(checkpoint_entry(by_name, p.name, p.value));
  for (std::size_t i = 0; i < values.size(); ++i) model.params[i].value = std::move(values[i]);
}

Model model_from_checkpoint(const Checkpoint& ckpt, std::size_t input_dim) {
  const TrainConfig cfg = parse_config(ckpt.config_text, {}, "<checkpoint config>");
  Model model = build_model(cfg, input_dim);
  load_parameters(model, ckpt);
  return model;
}

Matrix encode_representations(const Model& model, const SourceGraph& g) {
  ad::Tape tape;
  const nn::Binding params(tape, model.params, /*freeze_all=*/true);
  return model.encoder
      .forward(params, nn::normalize_adjacency(g.adjacency()), SparseMatrix::from_dense(g.features()))
      .value();
}

Matrix encode_embeddings(const Model& model, const SourceGraph& g) {
  ad::Tape tape;
  const nn::Binding params(tape, model.params, /*freeze_all=*/true);
  const ad::Var h = model.encoder.forward(params, nn::normalize_adjacency(g.adjacency()),
                                          SparseMatrix::from_dense(g.features()));
  return model.expander.forward(params, h).value();
}

PrecomputedEncodings precompute_encodings(const SourceGraph& g, const TrainConfig& cfg,
                                          const Model& model) {
  const auto& rg = cfg.relgraph;
  PrecomputedEncodings out;
  if (rg.use.lappe || rg.use.signnet) {
    const std::size_t widest = std::max(rg.use.lappe ? rg.lappe_freq : 0,
                                        rg.use.signnet ? rg.signnet_freq : 0);
    if (widest > g.num_nodes())
      throw ConfigError("relgraph: eigenvector count " + std::to_string(widest) +
                        " exceeds the number of nodes");
    // One decomposition serves both encodings.
    const SpectralDecomposition d =
        eigendecompose_symmetric(laplacian(g, cfg.pse.normalized_laplacian));
    if (rg.use.lappe) {
      Encoding e;
      e.kind = EncodingKind::kLapPE;
      e.values = lowest_nonzero_modes(d, rg.lappe_freq);
      e.isolated = isolated_nodes(g);
      out.lappe = std::move(e);
    }
    if (rg.use.signnet) {
      out.signnet_eigvecs = lowest_nonzero_modes(d, rg.signnet_freq);
      if (!rg.signnet_trainable) {
        out.signnet = signnet_encode(*model.signnet, model.params, *out.signnet_eigvecs);
        out.signnet->isolated = isolated_nodes(g);
      }
    }
  }
  if (rg.use.rwse) {
    RwseOptions opt;
    opt.exact_limit = cfg.pse.rwse_exact_limit;
    opt.walks_per_node = cfg.pse.rwse_walks;
    opt.seed = cfg.seed;
    out.rwse = rwse(g, rg.rwse_kernel, opt);
  }
  return out;
}

std::vector<RelationKind> enabled_relations(const TrainConfig& cfg) {
  const auto& rg = cfg.relgraph;
  std::vector<RelationKind> out;
  if (rg.use.aug) out.push_back(RelationKind::kAug);
  if (rg.knn_standalone) out.push_back(RelationKind::kKnn);
  if (rg.use.adj) out.push_back(RelationKind::kAdj);
  if (rg.use.adj_filtered) out.push_back(RelationKind::kAdjFiltered);
  if (rg.use.lappe) out.push_back(RelationKind::kLapPE);
  if (rg.use.rwse) out.push_back(rg.rwse_filtered ? RelationKind::kRwseFiltered : RelationKind::kRwse);
  if (rg.use.signnet) out.push_back(RelationKind::kSignNet);
  if (rg.use.cluster) out.push_back(RelationKind::kCluster);
  return out;
}

std::string metrics_header(std::size_t num_lambdas) {
  std::string s = "iteration,L_V,L_C,L_Iprime,L_O,L_R,total";
  for (std::size_t i = 1; i <= num_lambdas; ++i) s += ",lambda_" + std::to_string(i);
  return s;
}

std::string metrics_row(const IterationRecord& r) {
  std::string s = std::to_string(r.iteration);
  for (double v : {r.loss.variance, r.loss.covariance, r.loss.invariance, r.loss.alignment,
                   r.loss.regularizer, r.loss.total})
    s += "," + format_double(v);
  for (double l : r.lambdas) s += "," + format_double(l);
  return s;
}

struct Trainer::Forward {
  MiniBatchIndex batch;
  std::vector<int> views;
  std::vector<RelationGraph> graphs;
  Matrix h_batch;
  Matrix q;
  ad::Var z;
  ad::Var p;
  AggregatedGraph g;
  std::vector<IndexPair> ot;
};

Trainer::Trainer(const SourceGraph& graph, TrainConfig cfg)
    : graph_(graph),
      cfg_(std::move(cfg)),
      model_(build_model(cfg_, graph.feature_dim())),
      encodings_(precompute_encodings(graph, cfg_, model_)),
      optimizer_(cfg_.optimizer, cfg_.lr, cfg_.weight_decay) {
  if (cfg_.batch_size > 2 * graph.num_nodes())
    throw ConfigError("train.batch_size: " + std::to_string(cfg_.batch_size) +
                      " exceeds twice the node count " + std::to_string(graph.num_nodes()));
  if (cfg_.relgraph.signnet_trainable && cfg_.relgraph.use.signnet &&
      cfg_.relgraph.pse_metric != SimilarityMetric::kCosine)
    throw ConfigError("relgraph.signnet.trainable requires relgraph.pse_metric = cosine");
}

Trainer::Forward Trainer::forward(const nn::Binding& params, std::uint64_t t) const {
  const auto& rg = cfg_.relgraph;
  Rng rng = derive_rng(cfg_.seed, t);
  const ViewPair views = build_views(graph_, cfg_.view1, cfg_.view2, rng);

  Forward f;
  const ad::Var h_all = model_.encoder.forward(
      params, nn::normalize_adjacency(views.block_adjacency),
      SparseMatrix::from_dense(views.stacked_features));
  const ad::Var z_all = model_.expander.forward(params, h_all);
  f.batch = sample_batch(views, cfg_.batch_size, rng);
  const ad::Var h = ad::gather_rows(h_all, f.batch.batch_nodes);
  f.z = ad::gather_rows(z_all, f.batch.batch_nodes);
  f.h_batch = h.value();

  // E-step: every generator reads detached values.
  f.views = batch_views(f.batch);
  const PairFilter filter{f.views, rg.intra};
  const std::size_t n = f.batch.size();

  std::optional<RelationGraph> knn;
  if (needs_knn(cfg_)) knn = g_knn(f.h_batch, rg.knn_k, rg.knn_metric, filter);

  const ad::Var c = params[model_.prototypes];
  f.p = assign_probabilities(h, c, cfg_.cluster.tau);
  f.q = sinkhorn_codes(f.h_batch, c.value(), cfg_.cluster.epsilon, cfg_.cluster.sinkhorn_iters);

  std::optional<ad::Var> signnet_values;
  std::size_t signnet_slot = 0;
  for (RelationKind kind : enabled_relations(cfg_)) {
    switch (kind) {
      case RelationKind::kAug: f.graphs.push_back(g_aug(f.batch)); break;
      case RelationKind::kKnn: f.graphs.push_back(*knn); break;
      case RelationKind::kAdj: f.graphs.push_back(g_adj(graph_, f.batch, filter)); break;
      case RelationKind::kAdjFiltered:
        f.graphs.push_back(g_adj_filtered(g_adj(graph_, f.batch, filter), *knn));
        break;
      case RelationKind::kLapPE:
        f.graphs.push_back(g_pse(encodings_.lappe->values, f.batch, rg.lappe_k, rg.pse_metric,
                                 RelationKind::kLapPE, filter));
        break;
      case RelationKind::kRwse:
      case RelationKind::kRwseFiltered: {
        RelationGraph r = g_pse(encodings_.rwse->values, f.batch, rg.rwse_k, rg.pse_metric,
                                RelationKind::kRwse, filter);
        f.graphs.push_back(kind == RelationKind::kRwse ? std::move(r) : g_rwse_filtered(r, *knn));
        break;
      }
      case RelationKind::kSignNet:
        if (encodings_.signnet) {
          f.graphs.push_back(g_pse(encodings_.signnet->values, f.batch, rg.signnet_k,
                                   rg.pse_metric, RelationKind::kSignNet, filter));
        } else {
          // Trainable SignNet: the support comes from detached outputs and the
          // weights are recomputed on-tape as clamped cosine similarities.
          const ad::Var e_all = model_.signnet->forward(params, *encodings_.signnet_eigvecs);
          RelationGraph s = g_pse(e_all.value(), f.batch, rg.signnet_k, rg.pse_metric,
                                  RelationKind::kSignNet, filter);
          std::vector<std::size_t> sources(n);
          for (std::size_t i = 0; i < n; ++i) sources[i] = f.batch.source_of(i);
          std::vector<IndexPair> support;
          support.reserve(s.weights.nnz());
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t col : s.weights.row_cols(r)) support.emplace_back(r, col);
          signnet_values = ad::relu(ad::pair_cosine(ad::gather_rows(e_all, sources), support));
          signnet_slot = f.graphs.size();
          f.graphs.push_back(std::move(s));
        }
        break;
      case RelationKind::kCluster: {
        const auto k_global = static_cast<std::size_t>(
            std::llround(cfg_.cluster.kg_ratio * static_cast<double>(n)));
        f.graphs.push_back(g_cluster(f.p.value(), k_global, cfg_.cluster.global_topk, filter));
        break;
      }
      case RelationKind::kAggregate: break;
    }
  }

  std::vector<AggregateInput> inputs;
  for (std::size_t i = 0; i < f.graphs.size(); ++i) {
    AggregateInput in{&f.graphs[i], std::nullopt};
    if (signnet_values && i == signnet_slot) in.values = signnet_values;
    inputs.push_back(in);
  }
  f.g = model_.aggregator.aggregate(params, inputs, rg.binary);
  f.ot = ot_pairs(n, f.batch.augment_pairs, cfg_.cluster.pairs);
  return f;
}

GradientReport Trainer::gradients() const {
  ad::Tape tape;
  const nn::Binding params(tape, model_.params);
  const Forward f = forward(params, iteration_);

  LossInputs in;
  in.z = f.z;
  in.pairs = f.g.pairs;
  in.g_weights = f.g.weights;
  in.p = f.p;
  in.q = &f.q;
  in.ot_pairs = f.ot;
  TotalLoss loss;
  try {
    loss = total_loss(in, cfg_.weights);
  } catch (const NumericError& e) {
    throw NumericError("iteration " + std::to_string(iteration_) + ": " + e.what());
  }
  const LossReport& r = loss.report;
  if (!std::isfinite(r.total))
    throw NumericError("iteration " + std::to_string(iteration_) + ": non-finite loss (L_V=" +
                       format_double(r.variance) + " L_C=" + format_double(r.covariance) +
                       " L_Iprime=" + format_double(r.invariance) + " L_O=" +
                       format_double(r.alignment) + " L_R=" + format_double(r.regularizer) + ")");

  GradientReport out;
  out.record.iteration = iteration_ + 1;
  out.record.loss = r;
  out.record.lambdas.assign(f.g.lambdas.value().values().begin(),
                            f.g.lambdas.value().values().end());
  out.record.z_std = metric_std(f.z.value());
  out.differentiable = loss.value.requires_grad();
  out.grads.reserve(model_.params.size());
  if (out.differentiable) {
    const ad::Gradients grads = tape.backward(loss.value);
    for (std::size_t i = 0; i < model_.params.size(); ++i) out.grads.push_back(grads.of(params[i]));
  } else {
    for (const auto& p : model_.params) out.grads.emplace_back(p.value.rows(), p.value.cols());
  }
  return out;
}

IterationRecord Trainer::step() {
  GradientReport report = gradients();
  // M-step: one joint update of every trainable parameter.
  if (report.differentiable) {
    try {
      optimizer_.step(model_.params, report.grads);
    } catch (const NumericError& e) {
      throw NumericError("iteration " + std::to_string(iteration_) + ": " + e.what());
    }
    renormalize_prototypes(model_.params[model_.prototypes].value);
  }
  ++iteration_;
  return std::move(report.record);
}

void Trainer::run(const std::function<void(const IterationRecord&)>& on_record) {
  while (iteration_ < cfg_.iterations) {
    const IterationRecord rec = step();
    if (on_record) on_record(rec);
  }
}

EStepResult Trainer::inspect() const {
  ad::Tape tape;
  const nn::Binding params(tape, model_.params, /*freeze_all=*/true);
  Forward f = forward(params, iteration_);
  EStepResult out;
  out.batch = std::move(f.batch);
  out.graphs = std::move(f.graphs);
  RelationGraph agg;
  agg.kind = RelationKind::kAggregate;
  agg.weights = f.g.to_sparse();
  out.graphs.push_back(std::move(agg));
  out.h_batch = std::move(f.h_batch);
  out.q = std::move(f.q);
  return out;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ckpt;
  ckpt.config_text = to_string(cfg_);
  ckpt.iteration = iteration_;
  for (const auto& p : model_.params) ckpt.entries.push_back({p.name, p.value});
  ckpt.entries.push_back(
      {"opt/step", Matrix(1, 1, {static_cast<double>(optimizer_.steps())})});
  const auto& m = optimizer_.first_moments();
  const auto& v = optimizer_.second_moments();
  for (std::size_t i = 0; i < m.size(); ++i) {
    ckpt.entries.push_back({"opt/m/" + model_.params[i].name, m[i]});
    ckpt.entries.push_back({"opt/v/" + model_.params[i].name, v[i]});
  }
  return ckpt;
}

void Trainer::restore(const Checkpoint& ckpt) {
  const auto by_name = index_entries(ckpt);
  auto lookup = [&](const std::string& name, const Matrix& like) -> const Matrix& {
    return checkpoint_entry(by_name, name, like);
  };

  load_parameters(model_, ckpt);
  const Matrix& step = lookup("opt/step", Matrix(1, 1));
  std::vector<Matrix> m, v;
  if (step(0, 0) > 0.0) {
    for (const auto& p : model_.params) {
      m.push_back(lookup("opt/m/" + p.name, p.value));
      v.push_back(lookup("opt/v/" + p.name, p.value));
    }
  }
  optimizer_.restore(std::move(m), std::move(v), static_cast<std::uint64_t>(step(0, 0)));
  iteration_ = ckpt.iteration;
  if (model_.signnet && !cfg_.relgraph.signnet_trainable) {
    encodings_.signnet = signnet_encode(*model_.signnet, model_.params, *encodings_.signnet_eigvecs);
    encodings_.signnet->isolated = isolated_nodes(graph_);
  }
}

Matrix Trainer::representations() const { return encode_representations(model_, graph_); }

Matrix Trainer::embeddings() const { return encode_embeddings(model_, graph_); }

PretrainResult pretrain(const SourceGraph& g, const TrainConfig& cfg,
                        const PretrainOptions& options) {
  Trainer trainer(g, cfg);
  if (options.resume) {
    const Checkpoint ckpt = load_checkpoint(*options.resume);
    trainer.restore(ckpt);
  }
  if (options.out_dir) std::filesystem::create_directories(*options.out_dir);
  if (options.metrics) *options.metrics << metrics_header(enabled_relations(cfg).size()) << '\n';

  PretrainResult result;
  trainer.run([&](const IterationRecord& rec) {
    if (options.metrics) *options.metrics << metrics_row(rec) << '\n';
    result.trace.push_back(rec);
    const std::uint64_t done = trainer.iteration();
    if (options.out_dir && cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 &&
        done < cfg.iterations)
      save_checkpoint(*options.out_dir / ("ckpt_" + std::to_string(done) + ".bin"),
                      trainer.checkpoint());
  });
  if (options.metrics) options.metrics->flush();
  if (options.out_dir) save_checkpoint(*options.out_dir / "checkpoint.bin", trainer.checkpoint());
  result.model = std::move(trainer.model());
  return result;
}

}  // namespace exgrg
