#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "cli_harness.hpp"

namespace fs = std::filesystem;
using namespace promptdt::testing;

namespace {

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override { dir_ = scratch_dir(::testing::UnitTest::GetInstance()->current_test_info()->name()); }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

TEST_F(CliTest, HelpAndUsageExitCodes) {
  EXPECT_EQ(run_cli("--help").exit_code, 0);
  EXPECT_EQ(run_cli("").exit_code, 2);
  EXPECT_EQ(run_cli("frobnicate").exit_code, 2);
  EXPECT_EQ(run_cli("gen-data").exit_code, 2);  // --family is required
  const auto bad = run_cli("gen-data --family walker --out " + q(dir_ / "d"));
  EXPECT_EQ(bad.exit_code, 2);
  EXPECT_NE(bad.output.find("walker"), std::string::npos);
}

TEST_F(CliTest, GenDataWritesManifestAndOneFilePerTask) {
  const auto r = run_cli("gen-data --family point-vel --episodes 3 --demos 2 --out " + q(dir_ / "d"));
  ASSERT_EQ(r.exit_code, 0) << r.output;
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir_ / "d")) n += e.path().extension() == ".pdtd";
  EXPECT_EQ(n, 40u);
  const auto m = nlohmann::json::parse(read_file(dir_ / "d" / "manifest.json"));
  EXPECT_EQ(m["schema_version"], 1);
  EXPECT_EQ(m["family"], "point-vel");
  EXPECT_EQ(m["T"], 100);
  EXPECT_EQ(m["train"].size(), 35u);
  EXPECT_EQ(m["test"].size(), 5u);
  ASSERT_EQ(m["files"].size(), 40u);
  for (const auto& f : m["files"]) {
    EXPECT_EQ(f["demo_ids"].size(), 2u);
    EXPECT_TRUE(fs::exists(dir_ / "d" / f["file"].get<std::string>()));
  }
  EXPECT_TRUE(fs::exists(dir_ / "d" / "config.json"));
}

TEST_F(CliTest, GenDataIsByteIdenticalAcrossRuns) {
  ASSERT_EQ(run_cli("gen-data --family point-dir --episodes 4 --demos 2 --out " + q(dir_ / "a")).exit_code, 0);
  ASSERT_EQ(run_cli("gen-data --family point-dir --episodes 4 --demos 2 --out " + q(dir_ / "b")).exit_code, 0);
  for (const char* f : {"manifest.json", "task_00.pdtd", "task_01.pdtd"}) {
    EXPECT_EQ(read_file(dir_ / "a" / f), read_file(dir_ / "b" / f)) << f;
  }
}

TEST_F(CliTest, RefusesNonEmptyOutputWithoutForce) {
  const std::string args = "gen-data --family point-dir --episodes 2 --demos 1 --out " + q(dir_ / "d");
  ASSERT_EQ(run_cli(args).exit_code, 0);
  const auto again = run_cli(args);
  EXPECT_EQ(again.exit_code, 2);
  EXPECT_NE(again.output.find("--force"), std::string::npos);
  EXPECT_EQ(run_cli(args + " --force").exit_code, 0);
}

TEST_F(CliTest, TrainEvalRoundTrip) {
  ASSERT_EQ(run_cli("gen-data --family point-dir --episodes 10 --out " + q(dir_ / "d")).exit_code, 0);
  const std::string train = "train --data " + q(dir_ / "d") +
                            " --iterations 4 --eval-interval 2 --eval-episodes 1 --embed-dim 16 --layers 1 --out ";
  const auto t = run_cli(train + q(dir_ / "r"));
  ASSERT_EQ(t.exit_code, 0) << t.output;
  for (const char* f : {"config.json", "checkpoint.pdtw", "metrics.csv"}) EXPECT_TRUE(fs::exists(dir_ / "r" / f)) << f;
  const auto cfg = nlohmann::json::parse(read_file(dir_ / "r" / "config.json"));
  EXPECT_EQ(cfg["train"]["target_return"], 160.0);
  EXPECT_EQ(cfg["train"]["Kstar"], 5);
  const std::string metrics = read_file(dir_ / "r" / "metrics.csv");
  EXPECT_EQ(metrics.rfind("iter,variant,task_id,mean_return,train_loss,wall_clock_s\n", 0), 0u);

  ASSERT_EQ(run_cli(train + q(dir_ / "r2")).exit_code, 0);
  EXPECT_EQ(metrics, read_file(dir_ / "r2" / "metrics.csv"));
  EXPECT_EQ(read_file(dir_ / "r" / "checkpoint.pdtw"), read_file(dir_ / "r2" / "checkpoint.pdtw"));

  const auto e = run_cli("eval --run " + q(dir_ / "r") + " --prompt-quality expert --prompt-quality medium" +
                         " --episodes 1 --trace " + q(dir_ / "trace.jsonl") + " --out " + q(dir_ / "e"));
  ASSERT_EQ(e.exit_code, 0) << e.output;
  const std::string csv = read_file(dir_ / "e" / "eval.csv");
  EXPECT_EQ(csv.rfind("mode,prompt_quality,task_id,mean_return,std_return,episodes\n", 0), 0u);
  EXPECT_NE(csv.find("few-shot,expert,-1,"), std::string::npos);
  EXPECT_NE(csv.find("few-shot,medium,-1,"), std::string::npos);
  EXPECT_NE(read_file(dir_ / "trace.jsonl").find("\"g\":160.0"), std::string::npos);
}

TEST_F(CliTest, EvalErrors) {
  ASSERT_EQ(run_cli("gen-data --family point-dir --episodes 10 --out " + q(dir_ / "d")).exit_code, 0);
  ASSERT_EQ(run_cli("train --data " + q(dir_ / "d") +
                    " --iterations 1 --eval-interval 0 --embed-dim 16 --layers 1 --out " + q(dir_ / "r"))
                .exit_code,
            0);
  const auto missing = run_cli("eval --checkpoint " + q(dir_ / "nope.pdtw") + " --data " + q(dir_ / "d"));
  EXPECT_EQ(missing.exit_code, 2);
  EXPECT_NE(missing.output.find("nope.pdtw"), std::string::npos);
  EXPECT_EQ(run_cli("eval --run " + q(dir_ / "r") + " --variant mt-bc --out " + q(dir_ / "e1")).exit_code, 2);
  EXPECT_EQ(run_cli("eval --run " + q(dir_ / "r") + " --finetune-data 10 --out " + q(dir_ / "e2")).exit_code, 2);
  EXPECT_EQ(run_cli("eval --run " + q(dir_ / "r") + " --Kstar 7 --J 2 --out " + q(dir_ / "e3")).exit_code, 2);
}

TEST_F(CliTest, FinetuneEvalForPromptFreeVariant) {
  ASSERT_EQ(run_cli("gen-data --family point-dir --episodes 10 --out " + q(dir_ / "d")).exit_code, 0);
  const auto t = run_cli("train --data " + q(dir_ / "d") + " --variant mt-bc --J 2" +
                         " --iterations 2 --eval-interval 0 --embed-dim 16 --layers 1 --out " + q(dir_ / "r"));
  ASSERT_EQ(t.exit_code, 0) << t.output;
  EXPECT_NE(t.output.find("warning"), std::string::npos);
  const auto e = run_cli("eval --run " + q(dir_ / "r") + " --finetune-data 20 --finetune-steps 2 --episodes 1 --out " +
                         q(dir_ / "e"));
  ASSERT_EQ(e.exit_code, 0) << e.output;
  EXPECT_NE(read_file(dir_ / "e" / "eval.csv").find("finetune,expert,-1,"), std::string::npos);
}

TEST_F(CliTest, AblateRejectsEmptyOrUnknownSweep) {
  EXPECT_EQ(run_cli("ablate --sweep widths --out " + q(dir_ / "a")).exit_code, 2);
  EXPECT_EQ(run_cli("ablate --sweep quality --seeds '' --out " + q(dir_ / "b")).exit_code, 2);
}

TEST_F(CliTest, PlotEmbedsSourceRows) {
  const fs::path m = dir_ / "metrics.csv";
  std::ofstream(m) << "iter,variant,task_id,mean_return,train_loss,wall_clock_s\n"
                   << "10,prompt-dt,0,1.5,0.3,0\n10,prompt-dt,-1,2.5,0.3,0\n20,prompt-dt,-1,4.25,0.2,0\n";
  const fs::path a = dir_ / "ablation.csv";
  std::ofstream(a) << "sweep,cell,seed,variant,train_quality,prompt_quality,Kstar,J,H,mean_return,expert_return\n"
                   << "ood,0,1,prompt-dt,expert,expert,5,1,5,120,150\n"
                   << "ood,1,1,mt-orl,expert,expert,5,1,5,-30,150\n";
  const auto r = run_cli("plot --metrics " + q(m) + " --ablation " + q(a) + " --out " + q(dir_ / "p"));
  ASSERT_EQ(r.exit_code, 0) << r.output;
  const std::string svg = read_file(dir_ / "p" / "returns.svg");
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_NE(svg.find("20,prompt-dt,-1,4.25"), std::string::npos);
  EXPECT_NE(read_file(dir_ / "p" / "ablation.svg").find("mt-orl"), std::string::npos);
  EXPECT_EQ(run_cli("plot --out " + q(dir_ / "p2")).exit_code, 2);
}

}  // namespace
