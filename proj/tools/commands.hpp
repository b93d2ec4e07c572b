#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace exgrg::cli {

/// Shared by commands that build a TrainConfig: file first, then `key=value` overrides.
struct ConfigOptions {
  std::optional<std::filesystem::path> config;
  std::vector<std::string> set;
  std::optional<std::uint64_t> seed;
};

struct PretrainOptions {
  ConfigOptions cfg;
  std::filesystem::path data;
  std::filesystem::path out;
  std::optional<std::filesystem::path> resume;
};

struct ProbeOptions {
  std::optional<std::filesystem::path> checkpoint;
  bool raw = false;  // probe the input features instead of H
  std::filesystem::path data;
  std::filesystem::path out;
  std::size_t trials = 20;
  std::uint64_t seed = 0;
  double train_ratio = 0.1;
  double val_ratio = 0.1;
  std::optional<std::filesystem::path> split;
};

struct MetricsOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path data;
  std::filesystem::path out;
};

struct PseOptions {
  ConfigOptions cfg;
  std::optional<std::filesystem::path> checkpoint;
  std::filesystem::path data;
  std::filesystem::path out;
  std::string kind;
  std::optional<std::size_t> freq;
  std::optional<std::size_t> kernel;
};

struct RelgraphOptions {
  ConfigOptions cfg;
  std::optional<std::filesystem::path> checkpoint;
  std::filesystem::path data;
  std::filesystem::path out;
  std::string kind;
  std::optional<std::size_t> k;
  std::optional<std::size_t> batch;
};

struct GenSbmOptions {
  std::size_t blocks = 2;
  std::size_t nodes_per_block = 50;
  double p_in = 0.1;
  double p_out = 0.01;
  std::size_t feature_dim = 16;
  double noise = 1.0;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};

void cmd_pretrain(const PretrainOptions& o);
void cmd_probe(const ProbeOptions& o);
void cmd_metrics(const MetricsOptions& o);
void cmd_pse(const PseOptions& o);
void cmd_relgraph(const RelgraphOptions& o);
void cmd_gen_sbm(const GenSbmOptions& o);

}  // namespace exgrg::cli
