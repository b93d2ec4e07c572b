#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#ifndef EXGRG_CLI_PATH
#error "EXGRG_CLI_PATH must point at the exgrg executable"
#endif

namespace {

namespace fs = std::filesystem;

int run(const std::string& args) {
  const std::string cmd = std::string(EXGRG_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("exgrg_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
    std::ofstream cfg(root_ / "small.cfg");
    cfg << "train.iterations = 10\ntrain.batch_size = 16\n"
           "encoder.hidden = 8\nencoder.out_dim = 8\nexpander.hidden = 8\nexpander.out_dim = 8\n"
           "relgraph.knn.k = 3\nrelgraph.lappe.k = 2\nrelgraph.lappe.freq = 4\n"
           "relgraph.rwse.k = 3\nrelgraph.rwse.kernel = 4\n"
           "relgraph.signnet.k = 2\nrelgraph.signnet.freq = 4\n"
           "cluster.k = 4\ncluster.kg_ratio = 2\n";
  }
  void TearDown() override { fs::remove_all(root_); }

  std::string path(const std::string& name) const { return (root_ / name).string(); }

  void make_sbm(const std::string& name, const std::string& extra = "") {
    ASSERT_EQ(run("gen-sbm --blocks 3 --nodes-per-block 10 --p-in 0.5 --p-out 0.05 "
                  "--feature-dim 6 --seed 2 --out " + path(name) + " " + extra),
              0);
  }

  fs::path root_;
};

TEST_F(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("pretrain --help"), 0);
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("pretrain --data x"), 1);
}

TEST_F(Cli, ConfigErrorsExitOne) {
  make_sbm("g");
  EXPECT_EQ(run("pretrain --data " + path("g") + " --out " + path("o") + " --set no.such=1"), 1);
  EXPECT_EQ(run("pretrain --data " + path("g") + " --out " + path("o") + " --set train.lr=-1"), 1);
  EXPECT_EQ(run("pretrain --data " + path("g") + " --out " + path("o") + " --config " +
                path("missing.cfg")),
            1);
}

TEST_F(Cli, DataErrorsExitTwo) {
  EXPECT_EQ(run("pretrain --data " + path("nothing") + " --out " + path("o") + " --config " +
                path("small.cfg")),
            2);
  make_sbm("g");
  {
    std::ofstream bad(root_ / "g" / "edges.txt", std::ios::app);
    bad << "0 oops\n";
  }
  EXPECT_EQ(run("pse --kind rwse --data " + path("g") + " --out " + path("o")), 2);
}

TEST_F(Cli, PretrainWritesMetricsAndIsDeterministic) {
  make_sbm("g");
  const std::string common = "pretrain --data " + path("g") + " --config " + path("small.cfg");
  ASSERT_EQ(run(common + " --out " + path("a")), 0);
  ASSERT_EQ(run(common + " --out " + path("b")), 0);
  const auto rows = lines(root_ / "a" / "metrics.csv");
  ASSERT_EQ(rows.size(), 11u);
  EXPECT_EQ(rows[0].rfind("iteration,L_V,L_C,L_Iprime,L_O,L_R,total,lambda_1", 0), 0u);
  EXPECT_EQ(rows[10].rfind("10,", 0), 0u);
  EXPECT_EQ(slurp(root_ / "a" / "metrics.csv"), slurp(root_ / "b" / "metrics.csv"));
  EXPECT_TRUE(fs::exists(root_ / "a" / "checkpoint.bin"));
  EXPECT_TRUE(fs::exists(root_ / "a" / "manifest.json"));

  ASSERT_EQ(run(common + " --seed 5 --out " + path("c")), 0);
  EXPECT_NE(slurp(root_ / "a" / "metrics.csv"), slurp(root_ / "c" / "metrics.csv"));

  ASSERT_EQ(run("metrics --checkpoint " + path("a/checkpoint.bin") + " --data " + path("g") +
                " --out " + path("m")),
            0);
  const std::string m = slurp(root_ / "m" / "metrics.csv");
  for (const char* key : {"corr_H", "corr_Z", "std_H", "std_Z", "nstd_H", "rank_H", "rank_Z"})
    EXPECT_NE(m.find(key), std::string::npos) << key;

  ASSERT_EQ(run("probe --checkpoint " + path("a/checkpoint.bin") + " --data " + path("g") +
                " --trials 3 --out " + path("p")),
            0);
  const auto probe = lines(root_ / "p" / "probe.csv");
  ASSERT_EQ(probe.size(), 6u);
  EXPECT_EQ(probe[4].rfind("mean,", 0), 0u);
}

TEST_F(Cli, PseOnTriangle) {
  fs::create_directories(root_ / "tri");
  std::ofstream(root_ / "tri" / "edges.txt") << "0 1\n1 2\n0 2\n";
  std::ofstream(root_ / "tri" / "features.csv") << "1\n1\n1\n";
  ASSERT_EQ(run("pse --kind rwse --kernel 3 --data " + path("tri") + " --out " + path("o")), 0);
  const auto rows = lines(root_ / "o" / "pse.csv");
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], "rwse_1,rwse_2,rwse_3");
  for (std::size_t i = 1; i < 4; ++i) EXPECT_EQ(rows[i], "0,0.5,0.25");
  EXPECT_EQ(run("pse --kind lappe --freq 3 --data " + path("tri") + " --out " + path("o")), 1);
}

TEST_F(Cli, AugRelationGraphPairsViews) {
  make_sbm("g");
  ASSERT_EQ(run("relgraph --kind aug --batch 8 --config " + path("small.cfg") + " --data " +
                path("g") + " --out " + path("r")),
            0);
  const auto rows = lines(root_ / "r" / "relgraph.txt");
  ASSERT_EQ(rows.size(), 9u);
  EXPECT_EQ(rows[0], "# aug 8 8");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::istringstream in(rows[i]);
    std::size_t r = 0, c = 0;
    double w = 0.0;
    in >> r >> c >> w;
    EXPECT_EQ(r > c ? r - c : c - r, 4u) << rows[i];
    EXPECT_EQ(w, 1.0);
  }
}

TEST_F(Cli, GenSbmCliques) {
  ASSERT_EQ(run("gen-sbm --blocks 3 --nodes-per-block 5 --p-in 1 --p-out 0 --out " + path("s")), 0);
  std::size_t edges = 0;
  for (const auto& l : lines(root_ / "s" / "edges.txt"))
    if (!l.empty() && l[0] != '#') ++edges;
  EXPECT_EQ(edges, 30u);
  EXPECT_EQ(lines(root_ / "s" / "labels.txt").size(), 15u);
  EXPECT_EQ(run("gen-sbm --p-in 2 --out " + path("t")), 1);
}

}  // namespace
