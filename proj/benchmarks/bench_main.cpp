#include <benchmark/benchmark.h>

#include <random>

#include "exgrg/clustering.hpp"
#include "exgrg/graph.hpp"
#include "exgrg/nn.hpp"
#include "exgrg/pse.hpp"
#include "exgrg/relgraph.hpp"
#include "exgrg/trainer.hpp"

namespace {

using namespace exgrg;

Matrix gaussian(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n;
  Matrix m(r, c);
  for (double& v : m.values()) v = n(rng);
  return m;
}

SourceGraph sbm(std::size_t per_block) {
  SbmParams p;
  p.blocks = 4;
  p.nodes_per_block = per_block;
  p.p_in = 0.1;
  p.p_out = 0.01;
  p.feature_dim = 32;
  p.seed = 1;
  return generate_sbm(p);
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = gaussian(n, n, 1), b = gaussian(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256)->Arg(512);

void BM_NormalizedAdjacencyProduct(benchmark::State& state) {
  const SourceGraph g = sbm(static_cast<std::size_t>(state.range(0)));
  const SparseMatrix a = nn::normalize_adjacency(g.adjacency());
  const Matrix x = gaussian(g.num_nodes(), 64, 3);
  for (auto _ : state) benchmark::DoNotOptimize(a.multiply(x));
  state.counters["nnz"] = static_cast<double>(a.nnz());
}
BENCHMARK(BM_NormalizedAdjacencyProduct)->Arg(250)->Arg(1000);

void BM_Sinkhorn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix h = gaussian(n, 128, 4);
  Rng rng(5);
  const Matrix c = init_prototypes(64, 128, rng);
  for (auto _ : state) benchmark::DoNotOptimize(sinkhorn_codes(h, c, 0.05, 6));
}
BENCHMARK(BM_Sinkhorn)->Arg(256)->Arg(1024)->Arg(3072);

void BM_TopKRowwise(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix s = similarity_matrix(gaussian(n, 64, 6), SimilarityMetric::kCosine);
  for (auto _ : state) benchmark::DoNotOptimize(f_k_rowwise(s, 32));
}
BENCHMARK(BM_TopKRowwise)->Arg(512)->Arg(2048);

void BM_TopKGlobal(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix s = similarity_matrix(gaussian(n, 64, 7), SimilarityMetric::kCosine);
  for (auto _ : state) benchmark::DoNotOptimize(f_K_global(s, 12 * n));
}
BENCHMARK(BM_TopKGlobal)->Arg(512)->Arg(2048);

void BM_Rwse(benchmark::State& state) {
  const SourceGraph g = sbm(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(rwse(g, 24));
}
BENCHMARK(BM_Rwse)->Arg(100)->Arg(500);

// One full E-step/M-step update at the collapse-regression scale.
void BM_TrainerStep(benchmark::State& state) {
  const SourceGraph g = sbm(100);
  TrainConfig cfg;
  cfg.batch_size = static_cast<std::size_t>(state.range(0));
  cfg.encoder.hidden = 64;
  cfg.encoder.out_dim = 64;
  cfg.expander.hidden = 128;
  cfg.expander.out_dim = 128;
  cfg.cluster.prototypes = 16;
  cfg.iterations = 1u << 30;
  Trainer t(g, cfg);
  for (auto _ : state) benchmark::DoNotOptimize(t.step());
}
BENCHMARK(BM_TrainerStep)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
