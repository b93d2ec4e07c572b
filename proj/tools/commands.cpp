#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "exgrg/checkpoint.hpp"
#include "exgrg/config.hpp"
#include "exgrg/error.hpp"
#include "exgrg/eval.hpp"
#include "exgrg/graph.hpp"
#include "exgrg/pse.hpp"
#include "exgrg/relgraph.hpp"
#include "exgrg/spectral.hpp"
#include "exgrg/trainer.hpp"
#include "manifest.hpp"

namespace exgrg::cli {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

TrainConfig resolve_config(const ConfigOptions& o, const TrainConfig& base = {}) {
  TrainConfig cfg = o.config ? load_config(*o.config, base) : base;
  for (const std::string& kv : o.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.seed) cfg.seed = *o.seed;
  cfg.validate();
  return cfg;
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m, const std::string& prefix) {
  auto out = open_output(path);
  for (std::size_t c = 0; c < m.cols(); ++c) out << (c ? "," : "") << prefix << '_' << c + 1;
  out << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out << (c ? "," : "") << fmt(m(r, c));
    out << '\n';
  }
}

}  // namespace

void cmd_pretrain(const PretrainOptions& o) {
  const TrainConfig cfg = resolve_config(o.cfg);
  RunManifest m{"pretrain", to_string(cfg), cfg.seed, graph_inputs(o.data), o.out, {}};
  if (o.resume) m.inputs.push_back(*o.resume);
  write_manifest(m);

  const SourceGraph g = load_graph_dir(o.data);
  auto metrics = open_output(o.out / "metrics.csv");
  exgrg::PretrainOptions opts;
  opts.out_dir = o.out;
  opts.metrics = &metrics;
  opts.resume = o.resume;
  const PretrainResult result = pretrain(g, cfg, opts);
  std::cerr << "pretrain: " << result.trace.size() << " iterations, checkpoint "
            << (o.out / "checkpoint.bin").string() << '\n';
}

void cmd_probe(const ProbeOptions& o) {
  if (o.raw == o.checkpoint.has_value())
    throw ConfigError("probe: pass exactly one of --checkpoint and --raw");
  RunManifest m{"probe", std::nullopt, o.seed, graph_inputs(o.data), o.out,
                {{"trials", std::to_string(o.trials)}, {"source", o.raw ? "raw" : "checkpoint"}}};
  if (o.checkpoint) m.inputs.push_back(*o.checkpoint);
  if (o.split) m.inputs.push_back(*o.split);
  write_manifest(m);

  const SourceGraph g = load_graph_dir(o.data);
  if (!g.labels()) throw DataError("probe: " + (o.data / "labels.txt").string() + " is absent");
  Matrix features = g.features();
  if (o.checkpoint) {
    const Checkpoint ckpt = load_checkpoint(*o.checkpoint);
    features = encode_representations(model_from_checkpoint(ckpt, g.feature_dim()), g);
  }
  ProbeConfig pc;
  pc.trials = o.trials;
  pc.seed = o.seed;
  pc.train_ratio = o.train_ratio;
  pc.val_ratio = o.val_ratio;
  std::optional<Split> split;
  if (o.split) split = load_split(*o.split, g.num_nodes());
  const ProbeResult r = linear_probe(features, *g.labels(), g.num_classes(), pc, split);

  auto out = open_output(o.out / "probe.csv");
  out << "trial,accuracy\n";
  for (std::size_t t = 0; t < r.trials.size(); ++t)
    out << t << ',' << fmt(r.trials[t].test_accuracy) << '\n';
  out << "mean," << fmt(r.mean) << '\n' << "std," << fmt(r.stddev) << '\n';
  if (r.redraws > 0) std::cerr << "probe: redrew " << r.redraws << " splits missing a class\n";
}

void cmd_metrics(const MetricsOptions& o) {
  RunManifest m{"metrics", std::nullopt, std::nullopt, graph_inputs(o.data), o.out, {}};
  m.inputs.push_back(o.checkpoint);
  write_manifest(m);

  const SourceGraph g = load_graph_dir(o.data);
  const Model model = model_from_checkpoint(load_checkpoint(o.checkpoint), g.feature_dim());
  const MetricsReport r =
      compute_metrics(encode_representations(model, g), encode_embeddings(model, g));
  auto out = open_output(o.out / "metrics.csv");
  out << "key,value\n"
      << "corr_H," << fmt(r.corr_h) << '\n'
      << "corr_Z," << fmt(r.corr_z) << '\n'
      << "std_H," << fmt(r.std_h) << '\n'
      << "std_Z," << fmt(r.std_z) << '\n'
      << "nstd_H," << fmt(r.nstd_h) << '\n'
      << "rank_H," << r.rank_h << '\n'
      << "rank_Z," << r.rank_z << '\n';
}

void cmd_pse(const PseOptions& o) {
  std::optional<Checkpoint> ckpt;
  if (o.checkpoint) ckpt = load_checkpoint(*o.checkpoint);
  const TrainConfig base =
      ckpt ? parse_config(ckpt->config_text, {}, "<checkpoint config>") : TrainConfig{};
  TrainConfig cfg = resolve_config(o.cfg, base);
  const EncodingKind kind = o.kind == "lappe"     ? EncodingKind::kLapPE
                            : o.kind == "rwse"    ? EncodingKind::kRwse
                            : o.kind == "signnet" ? EncodingKind::kSignNet
                                                  : throw ConfigError("pse: unknown --kind '" +
                                                                      o.kind + "'");
  if (o.freq) (kind == EncodingKind::kSignNet ? cfg.relgraph.signnet_freq : cfg.relgraph.lappe_freq) = *o.freq;
  if (o.kernel) cfg.relgraph.rwse_kernel = *o.kernel;
  RunManifest m{"pse", to_string(cfg), cfg.seed, graph_inputs(o.data), o.out, {{"kind", o.kind}}};
  if (o.checkpoint) m.inputs.push_back(*o.checkpoint);
  write_manifest(m);

  const SourceGraph g = load_graph_dir(o.data);
  Encoding e;
  switch (kind) {
    case EncodingKind::kLapPE:
      e = lappe(g, cfg.relgraph.lappe_freq, cfg.pse.normalized_laplacian);
      break;
    case EncodingKind::kRwse: {
      RwseOptions ro;
      ro.exact_limit = cfg.pse.rwse_exact_limit;
      ro.walks_per_node = cfg.pse.rwse_walks;
      ro.seed = cfg.seed;
      e = rwse(g, cfg.relgraph.rwse_kernel, ro);
      break;
    }
    case EncodingKind::kSignNet: {
      cfg.relgraph.use.signnet = true;
      Model model = build_model(cfg, g.feature_dim());
      if (ckpt) load_parameters(model, *ckpt);
      const Matrix eig = lowest_nonzero_modes(
          eigendecompose_symmetric(laplacian(g, cfg.pse.normalized_laplacian)),
          cfg.relgraph.signnet_freq);
      e = signnet_encode(*model.signnet, model.params, eig);
      break;
    }
  }
  write_matrix_csv(o.out / "pse.csv", e.values, std::string(to_string(kind)));
}

void cmd_relgraph(const RelgraphOptions& o) {
  std::optional<Checkpoint> ckpt;
  if (o.checkpoint) ckpt = load_checkpoint(*o.checkpoint);
  const TrainConfig base =
      ckpt ? parse_config(ckpt->config_text, {}, "<checkpoint config>") : TrainConfig{};
  TrainConfig cfg = resolve_config(o.cfg, base);
  const RelationKind kind = parse_relation_kind(o.kind);
  auto& rg = cfg.relgraph;
  switch (kind) {
    case RelationKind::kAug: rg.use.aug = true; break;
    case RelationKind::kKnn:
      rg.knn_standalone = true;
      if (o.k) rg.knn_k = *o.k;
      break;
    case RelationKind::kAdj: rg.use.adj = true; break;
    case RelationKind::kAdjFiltered:
      rg.use.adj_filtered = true;
      if (o.k) rg.knn_k = *o.k;
      break;
    case RelationKind::kLapPE:
      rg.use.lappe = true;
      if (o.k) rg.lappe_k = *o.k;
      break;
    case RelationKind::kRwse:
    case RelationKind::kRwseFiltered:
      rg.use.rwse = true;
      rg.rwse_filtered = kind == RelationKind::kRwseFiltered;
      if (o.k) rg.rwse_k = *o.k;
      break;
    case RelationKind::kSignNet:
      rg.use.signnet = true;
      if (o.k) rg.signnet_k = *o.k;
      break;
    case RelationKind::kCluster: rg.use.cluster = true; break;
    case RelationKind::kAggregate: break;
  }
  RunManifest m{"relgraph", std::nullopt, cfg.seed, graph_inputs(o.data), o.out, {{"kind", o.kind}}};
  if (o.checkpoint) m.inputs.push_back(*o.checkpoint);

  const SourceGraph g = load_graph_dir(o.data);
  // The default batch is capped at 2M so small graphs work without --batch.
  cfg.batch_size = o.batch ? *o.batch : std::min(cfg.batch_size, 2 * g.num_nodes());
  cfg.validate();
  m.config_text = to_string(cfg);
  write_manifest(m);

  Trainer trainer(g, cfg);
  if (ckpt) trainer.restore(*ckpt);
  const EStepResult e = trainer.inspect();
  const auto it = std::find_if(e.graphs.begin(), e.graphs.end(),
                               [&](const RelationGraph& r) { return r.kind == kind; });
  if (it == e.graphs.end()) throw ConfigError("relgraph: kind '" + o.kind + "' was not built");
  auto out = open_output(o.out / "relgraph.txt");
  out << "# " << to_string(kind) << ' ' << it->size() << ' ' << it->weights.nnz() << '\n';
  for (const auto& t : it->weights.triplets())
    out << t.row << ' ' << t.col << ' ' << fmt(t.value) << '\n';
}

void cmd_gen_sbm(const GenSbmOptions& o) {
  write_manifest({"gen-sbm",
                  std::nullopt,
                  o.seed,
                  {},
                  o.out,
                  {{"blocks", std::to_string(o.blocks)},
                   {"nodes_per_block", std::to_string(o.nodes_per_block)},
                   {"p_in", fmt(o.p_in)},
                   {"p_out", fmt(o.p_out)},
                   {"feature_dim", std::to_string(o.feature_dim)},
                   {"noise", fmt(o.noise)}}});
  SbmParams p;
  p.blocks = o.blocks;
  p.nodes_per_block = o.nodes_per_block;
  p.p_in = o.p_in;
  p.p_out = o.p_out;
  p.feature_dim = o.feature_dim;
  p.feature_noise = o.noise;
  p.seed = o.seed;
  save_graph_dir(generate_sbm(p), o.out);
}

}  // namespace exgrg::cli
