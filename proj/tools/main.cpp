#include <CLI11.hpp>
#include <exception>
#include <filesystem>
#include <iostream>

#include "commands.hpp"
#include "exgrg/error.hpp"

namespace {

// Exit codes are part of the scripting contract.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

void add_config_options(CLI::App* cmd, exgrg::cli::ConfigOptions& o) {
  cmd->add_option("--config", o.config, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", o.set, "override one config key (key=value), repeatable");
  cmd->add_option("--seed", o.seed, "override the config seed");
}

}  // namespace

int main(int argc, char** argv) {
  namespace cli = exgrg::cli;
  CLI::App app{"exgrg: graph SSL pre-training with explicitly generated relation graphs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", EXGRG_VERSION);

  cli::PretrainOptions pretrain;
  auto* c_pretrain = app.add_subcommand("pretrain", "train encoder, expander, prototypes and Psi");
  add_config_options(c_pretrain, pretrain.cfg);
  c_pretrain->add_option("--data", pretrain.data, "graph directory")->required();
  c_pretrain->add_option("--out", pretrain.out, "output directory")->required();
  c_pretrain->add_option("--resume", pretrain.resume, "checkpoint to resume from");

  cli::ProbeOptions probe;
  auto* c_probe = app.add_subcommand("probe", "linear probe on frozen representations");
  c_probe->add_option("--checkpoint", probe.checkpoint, "trained checkpoint");
  c_probe->add_flag("--raw", probe.raw, "probe the raw input features");
  c_probe->add_option("--data", probe.data, "graph directory with labels.txt")->required();
  c_probe->add_option("--out", probe.out, "output directory")->required();
  c_probe->add_option("--trials", probe.trials, "random-split trials")->capture_default_str();
  c_probe->add_option("--seed", probe.seed, "split seed")->capture_default_str();
  c_probe->add_option("--train-ratio", probe.train_ratio)->capture_default_str();
  c_probe->add_option("--val-ratio", probe.val_ratio)->capture_default_str();
  c_probe->add_option("--split", probe.split, "fixed split file (train:/val:/test: lines)");

  cli::MetricsOptions metrics;
  auto* c_metrics = app.add_subcommand("metrics", "corr/std/nstd/rank of H and Z");
  c_metrics->add_option("--checkpoint", metrics.checkpoint)->required();
  c_metrics->add_option("--data", metrics.data)->required();
  c_metrics->add_option("--out", metrics.out)->required();

  cli::PseOptions pse;
  auto* c_pse = app.add_subcommand("pse", "positional/structural encodings as CSV");
  add_config_options(c_pse, pse.cfg);
  c_pse->add_option("--checkpoint", pse.checkpoint, "take SignNet weights from a checkpoint");
  c_pse->add_option("--data", pse.data)->required();
  c_pse->add_option("--out", pse.out)->required();
  c_pse->add_option("--kind", pse.kind)->required()->check(CLI::IsMember({"lappe", "rwse", "signnet"}));
  c_pse->add_option("--freq", pse.freq, "LapPE / SignNet eigenvector count");
  c_pse->add_option("--kernel", pse.kernel, "RWSE walk length");

  cli::RelgraphOptions relgraph;
  auto* c_rel = app.add_subcommand("relgraph", "one relation graph of the first mini-batch");
  add_config_options(c_rel, relgraph.cfg);
  c_rel->add_option("--checkpoint", relgraph.checkpoint);
  c_rel->add_option("--data", relgraph.data)->required();
  c_rel->add_option("--out", relgraph.out)->required();
  c_rel->add_option("--kind", relgraph.kind)->required();
  c_rel->add_option("--k", relgraph.k, "neighbours per row for kNN-style graphs");
  c_rel->add_option("--batch", relgraph.batch, "mini-batch size N");

  cli::GenSbmOptions sbm;
  auto* c_sbm = app.add_subcommand("gen-sbm", "write a stochastic block model graph");
  c_sbm->add_option("--blocks", sbm.blocks)->capture_default_str();
  c_sbm->add_option("--nodes-per-block", sbm.nodes_per_block)->capture_default_str();
  c_sbm->add_option("--p-in", sbm.p_in)->capture_default_str();
  c_sbm->add_option("--p-out", sbm.p_out)->capture_default_str();
  c_sbm->add_option("--feature-dim", sbm.feature_dim)->capture_default_str();
  c_sbm->add_option("--noise", sbm.noise)->capture_default_str();
  c_sbm->add_option("--seed", sbm.seed)->capture_default_str();
  c_sbm->add_option("--out", sbm.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*c_pretrain) cli::cmd_pretrain(pretrain);
    else if (*c_probe) cli::cmd_probe(probe);
    else if (*c_metrics) cli::cmd_metrics(metrics);
    else if (*c_pse) cli::cmd_pse(pse);
    else if (*c_rel) cli::cmd_relgraph(relgraph);
    else if (*c_sbm) cli::cmd_gen_sbm(sbm);
  } catch (const exgrg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const exgrg::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const exgrg::Error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}
