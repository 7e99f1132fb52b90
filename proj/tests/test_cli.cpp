// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>

#include "ranger/campaign.hpp"
#include "ranger/io.hpp"
#include "ranger/modelzoo/models.hpp"
#include "ranger/profiler.hpp"

using namespace ranger;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(RANGER_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, p)) r.out += buf;
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("ranger_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(Cli, TrainProfileInstrumentEvaluate) {
  auto r = run("train --arch tiny-mlp --classes 2 --synthetic separable --count 300 --epochs 3 --seed 2 --out " +
               path("m.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(path("m.bin")));
  r = run("profile --model " + path("m.json") + " --synthetic separable --count 100 --out " + path("b.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  r = run("instrument --model " + path("m.json") + " --bounds " + path("b.json") + " --out " + path("m_ranger.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("inserted 2 Clip nodes"), std::string::npos) << r.out;
  const Graph g = load_model(path("m_ranger.json"), path("m_ranger.bin"));
  EXPECT_EQ(g.count(OpKind::Clip), 2u);
  r = run("evaluate --model " + path("m.json") + " --model " + path("m_ranger.json") +
          " --synthetic separable --count 100 --out " + path("e.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto e = json::parse(detail::read_file(path("e.json")));
  EXPECT_EQ(e[path("m.json")]["accuracy"], e[path("m_ranger.json")]["accuracy"]);
  // re-instrumenting is rejected at runtime
  r = run("instrument --model " + path("m_ranger.json") + " --bounds " + path("b.json") + " --out " + path("x.json"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("already instrumented"), std::string::npos);
}

TEST_F(Cli, ExhaustiveInjectMatchesLibraryOracle) {
  const Graph toy = zoo::toy_mlp(4);
  save_model(toy, path("toy.json"), path("toy.bin"));
  const auto r = run("inject --model " + path("toy.json") +
                     " --mode exhaustive --random-inputs 2 --format fixed16 --seed 3 --out " + path("r.json") +
                     " --csv " + path("h.csv"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto rep = results_from_report(json::parse(detail::read_file(path("r.json"))));
  ASSERT_EQ(rep.size(), 1u);

  CampaignConfig cfg;
  cfg.variants = {{"original", toy}};
  cfg.format = NumericFormat::fixed16();
  cfg.mode = CampaignMode::Exhaustive;
  Rng rng = make_rng(3, 0x1a9u);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 2; ++i) {
    std::vector<double> v(8);
    for (auto& x : v) x = u(rng);
    cfg.inputs.push_back(Tensor::from_values<double>({1, 8}, v));
  }
  const auto oracle = run_campaign(cfg).at(0);
  EXPECT_EQ(rep[0].n, oracle.n);
  EXPECT_EQ(rep[0].sdc_count, oracle.sdc_count);
  EXPECT_EQ(rep[0].masked_count, oracle.masked_count);
  EXPECT_EQ(rep[0].mode, "exhaustive");
  EXPECT_EQ(detail::read_file(path("h.csv")), bit_histogram_csv({oracle}));
}

TEST_F(Cli, InjectIsIdempotentAndReportCompares) {
  const Graph toy = zoo::toy_mlp(5);
  save_model(toy, path("toy.json"), path("toy.bin"));
  std::vector<Tensor> samples;
  for (int i = 0; i < 50; ++i) samples.push_back(Tensor::from_values<double>({1, 8}, std::vector<double>(8, 0.02 * i - 0.5)));
  save_bounds(profile_bounds(toy, samples, 100), path("b.json"));
  const std::string base = "inject --model " + path("toy.json") + " --bounds " + path("b.json") +
                           " --random-inputs 3 --trials 400 --seed 9 --workers 2 --out ";
  ASSERT_EQ(run(base + path("r1.json")).code, 0);
  ASSERT_EQ(run(base + path("r2.json")).code, 0);
  EXPECT_EQ(detail::read_file(path("r1.json")), detail::read_file(path("r2.json")));

  const auto all = results_from_report(json::parse(detail::read_file(path("r1.json"))));
  ASSERT_EQ(all.size(), 2u);
  detail::write_file(path("base.json"), report_json({all[0]}).dump());
  detail::write_file(path("ranger.json"), report_json({all[1]}).dump());
  const auto r = run("report --compare " + path("base.json") + " " + path("ranger.json") + " --csv " + path("red.csv"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("reduction"), std::string::npos);
  EXPECT_NE(r.out.find("ranger"), std::string::npos);
  EXPECT_EQ(detail::read_file(path("red.csv")), reduction_csv(compare_variants(all)));
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("--help").code, 0);
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("instrument --model a.json --bounds b.json --out c.json --bogus").code, 1);
  EXPECT_EQ(run("inject --model a.json --bits 40").code, 1);
  EXPECT_EQ(run("inject --model a.json --format fixed16 --mode nope").code, 1);
  EXPECT_EQ(run("instrument --model " + path("missing.json") + " --bounds b.json --out c.json").code, 2);
  EXPECT_EQ(run("report --compare " + path("missing.json")).code, 2);
}

TEST_F(Cli, ConfigFileSuppliesSubcommandOptions) {
  const Graph toy = zoo::toy_mlp(6);
  save_model(toy, path("toy.json"), path("toy.bin"));
  detail::write_file(path("exp.toml"),
                     "[profile]\npercentile = 99.0\nout = \"ignored.json\"\n\n"
                     "[inject]\nmodel = \"" + path("toy.json") + "\"\nrandom-inputs = 1\ntrials = 50\nseed = 4\n"
                     "format = \"fixed16\"\nout = \"" + path("cfg.json") + "\"\n");
  auto r = run("--config " + path("exp.toml") + " inject");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto rep = results_from_report(json::parse(detail::read_file(path("cfg.json"))));
  EXPECT_EQ(rep.at(0).n, 50u);
  EXPECT_EQ(rep.at(0).format, "fixed16");
  EXPECT_EQ(rep.at(0).seed, 4u);
  EXPECT_FALSE(fs::exists("ignored.json"));
  // command-line flags override the file
  r = run("--config " + path("exp.toml") + " inject --trials 20");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(results_from_report(json::parse(detail::read_file(path("cfg.json")))).at(0).n, 20u);
  EXPECT_EQ(run("inject --config " + path("exp.toml")).code, 1);
}

TEST_F(Cli, ConvergenceWritesCsv) {
  const Graph g = zoo::tiny_mlp(1, {1, 128}, 2);
  save_model(g, path("m.json"), path("m.bin"));
  const auto r = run("convergence --model " + path("m.json") + " --synthetic separable --count 50 --checkpoints 5,50");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.substr(0, 11), "layer,5,50\n") << r.out;
}

}  // namespace
