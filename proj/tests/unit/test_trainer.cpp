#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "exgrg/error.hpp"
#include "exgrg/trainer.hpp"
#include "support.hpp"

namespace exgrg {
namespace {

namespace fs = std::filesystem;

TrainConfig small_config() {
  TrainConfig c;
  c.seed = 7;
  c.iterations = 4;
  c.batch_size = 16;
  c.lr = 1e-3;
  c.encoder.hidden = 8;
  c.encoder.out_dim = 8;
  c.expander.hidden = 12;
  c.expander.out_dim = 12;
  c.relgraph.knn_k = 3;
  c.relgraph.lappe_k = 2;
  c.relgraph.lappe_freq = 4;
  c.relgraph.rwse_k = 3;
  c.relgraph.rwse_kernel = 4;
  c.relgraph.signnet_k = 2;
  c.relgraph.signnet_freq = 4;
  c.relgraph.signnet_hidden = 4;
  c.relgraph.signnet_out = 4;
  c.cluster.prototypes = 4;
  c.cluster.kg_ratio = 2.0;
  return c;
}

const SourceGraph& small_graph() {
  static const SourceGraph g = [] {
    SbmParams p;
    p.blocks = 3;
    p.nodes_per_block = 10;
    p.p_in = 0.5;
    p.p_out = 0.05;
    p.feature_dim = 6;
    p.seed = 3;
    return generate_sbm(p);
  }();
  return g;
}

double max_param_diff(const Model& a, const Model& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.params.size(); ++i)
    d = std::max(d, max_abs_diff(a.params[i].value, b.params[i].value));
  return d;
}

TEST(Trainer, ZeroIterationsReturnInitialModel) {
  TrainConfig c = small_config();
  c.iterations = 0;
  const PretrainResult r = pretrain(small_graph(), c);
  EXPECT_TRUE(r.trace.empty());
  const Model init = build_model(c, small_graph().feature_dim());
  ASSERT_EQ(r.model.params.size(), init.params.size());
  for (std::size_t i = 0; i < init.params.size(); ++i)
    EXPECT_EQ(r.model.params[i].value, init.params[i].value) << init.params[i].name;
}

TEST(Trainer, AllZeroWeightsLeaveParametersUnchanged) {
  TrainConfig c = small_config();
  c.weights = {0.0, 0.0, 0.0, 0.0, 0.0};
  Trainer t(small_graph(), c);
  const Model init = build_model(c, small_graph().feature_dim());
  t.run();
  EXPECT_EQ(t.iteration(), 4u);
  // Only prototype renormalization touches the values, at rounding level.
  EXPECT_LT(max_param_diff(t.model(), init), 1e-15);
}

TEST(Trainer, PrototypesStayOnUnitSphere) {
  Trainer t(small_graph(), small_config());
  t.run();
  const Matrix& c = t.model().params[t.model().prototypes].value;
  for (std::size_t r = 0; r < c.rows(); ++r) {
    double sq = 0.0;
    for (double v : c.row(r)) sq += v * v;
    EXPECT_NEAR(sq, 1.0, 1e-14);
  }
}

TEST(Trainer, ParametersMoveAndLambdasSumToOne) {
  Trainer t(small_graph(), small_config());
  const Model init = build_model(small_config(), small_graph().feature_dim());
  const IterationRecord r = t.step();
  EXPECT_EQ(r.iteration, 1u);
  ASSERT_EQ(r.lambdas.size(), enabled_relations(small_config()).size());
  double s = 0.0;
  for (double l : r.lambdas) {
    EXPECT_GT(l, 0.0);
    s += l;
  }
  EXPECT_NEAR(s, 1.0, 1e-14);
  EXPECT_TRUE(std::isfinite(r.loss.total));
  EXPECT_GT(max_param_diff(t.model(), init), 0.0);
}

TEST(Trainer, SameSeedSameTrajectory) {
  const PretrainResult a = pretrain(small_graph(), small_config());
  const PretrainResult b = pretrain(small_graph(), small_config());
  ASSERT_EQ(a.trace.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(metrics_row(a.trace[i]), metrics_row(b.trace[i]));
  EXPECT_EQ(max_param_diff(a.model, b.model), 0.0);
  TrainConfig other = small_config();
  other.seed = 8;
  EXPECT_NE(metrics_row(pretrain(small_graph(), other).trace[0]), metrics_row(a.trace[0]));
}

TEST(Trainer, ResumeReproducesUninterruptedRun) {
  Trainer straight(small_graph(), small_config());
  straight.run();

  Trainer first(small_graph(), small_config());
  first.step();
  first.step();
  const fs::path path = fs::temp_directory_path() / "exgrg_trainer_resume.bin";
  save_checkpoint(path, first.checkpoint());
  Trainer second(small_graph(), small_config());
  second.restore(load_checkpoint(path));
  fs::remove(path);
  EXPECT_EQ(second.iteration(), 2u);
  second.run();
  EXPECT_EQ(max_param_diff(straight.model(), second.model()), 0.0);
  EXPECT_EQ(straight.optimizer().first_moments(), second.optimizer().first_moments());
}

TEST(Trainer, PretrainWritesCheckpointsAndMetrics) {
  TrainConfig c = small_config();
  c.checkpoint_every = 2;
  const fs::path dir = fs::temp_directory_path() / "exgrg_trainer_out";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ostringstream metrics;
  PretrainOptions opt;
  opt.out_dir = dir;
  opt.metrics = &metrics;
  pretrain(small_graph(), c, opt);
  EXPECT_TRUE(fs::exists(dir / "ckpt_2.bin"));
  EXPECT_FALSE(fs::exists(dir / "ckpt_4.bin"));
  const Checkpoint final_ckpt = load_checkpoint(dir / "checkpoint.bin");
  EXPECT_EQ(final_ckpt.iteration, 4u);

  std::istringstream lines(metrics.str());
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, metrics_header(enabled_relations(c).size()));
  std::size_t rows = 0;
  while (std::getline(lines, line)) ++rows;
  EXPECT_EQ(rows, 4u);

  // Resuming from the mid-run checkpoint lands on the same final model.
  PretrainOptions resume;
  resume.resume = dir / "ckpt_2.bin";
  const PretrainResult resumed = pretrain(small_graph(), c, resume);
  EXPECT_EQ(resumed.trace.size(), 2u);
  const Model from_file = model_from_checkpoint(final_ckpt, small_graph().feature_dim());
  EXPECT_EQ(max_param_diff(resumed.model, from_file), 0.0);
  fs::remove_all(dir);
}

TEST(Trainer, InspectDoesNotMutate) {
  Trainer t(small_graph(), small_config());
  t.step();
  const Checkpoint before = t.checkpoint();
  const EStepResult a = t.inspect();
  const EStepResult b = t.inspect();
  const Checkpoint after = t.checkpoint();
  ASSERT_EQ(before.entries.size(), after.entries.size());
  for (std::size_t i = 0; i < before.entries.size(); ++i)
    EXPECT_EQ(before.entries[i].value, after.entries[i].value) << before.entries[i].name;
  EXPECT_EQ(t.iteration(), 1u);
  ASSERT_EQ(a.graphs.size(), b.graphs.size());
  EXPECT_EQ(a.graphs.size(), enabled_relations(small_config()).size() + 1);
  EXPECT_EQ(a.graphs.back().kind, RelationKind::kAggregate);
  for (std::size_t i = 0; i < a.graphs.size(); ++i) EXPECT_EQ(a.graphs[i].weights, b.graphs[i].weights);
  EXPECT_EQ(a.batch.batch_nodes, b.batch.batch_nodes);
  // inspect() previews the next step's batch.
  const IterationRecord r = t.step();
  EXPECT_EQ(r.iteration, 2u);
}

TEST(Trainer, EStepGraphsRespectViewFilter) {
  TrainConfig c = small_config();
  c.relgraph.intra = false;
  Trainer t(small_graph(), c);
  const EStepResult e = t.inspect();
  const std::vector<int> views = batch_views(e.batch);
  for (const auto& g : e.graphs)
    for (const auto& tr : g.weights.triplets()) {
      EXPECT_NE(tr.row, tr.col);
      EXPECT_NE(views[tr.row], views[tr.col]) << to_string(g.kind);
    }
}

TEST(Trainer, RepresentationsHaveExpectedShapes) {
  Trainer t(small_graph(), small_config());
  EXPECT_EQ(t.representations().rows(), 30u);
  EXPECT_EQ(t.representations().cols(), 8u);
  EXPECT_EQ(t.embeddings().cols(), 12u);
}

TEST(Trainer, RejectsOversizedBatch) {
  TrainConfig c = small_config();
  c.batch_size = 62;
  EXPECT_THROW(Trainer(small_graph(), c), ConfigError);
}

TEST(Trainer, TrainableSignNetReceivesGradient) {
  TrainConfig c = small_config();
  c.relgraph.signnet_trainable = true;
  Trainer t(small_graph(), c);
  const Model init = build_model(c, small_graph().feature_dim());
  t.step();
  double moved = 0.0;
  for (std::size_t i = 0; i < init.params.size(); ++i)
    if (init.params[i].name.starts_with("signnet"))
      moved += max_abs_diff(init.params[i].value, t.model().params[i].value);
  EXPECT_GT(moved, 0.0);
}

TEST(Trainer, EnabledRelationOrder) {
  TrainConfig c;
  EXPECT_EQ(enabled_relations(c),
            (std::vector<RelationKind>{RelationKind::kAug, RelationKind::kAdjFiltered,
                                       RelationKind::kLapPE, RelationKind::kRwse,
                                       RelationKind::kSignNet, RelationKind::kCluster}));
  c.relgraph.rwse_filtered = true;
  c.relgraph.knn_standalone = true;
  EXPECT_EQ(enabled_relations(c)[1], RelationKind::kKnn);
  EXPECT_EQ(enabled_relations(c)[4], RelationKind::kRwseFiltered);
}

}  // namespace
}  // namespace exgrg
