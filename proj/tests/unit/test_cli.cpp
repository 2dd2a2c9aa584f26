#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "seqac/checkpoint.hpp"
#include "seqac/config.hpp"

using namespace seqac;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

// One scratch directory per test, so tests can run in parallel processes.
fs::path work_dir() {
  const std::string name = ::testing::UnitTest::GetInstance()->current_test_info()->name();
  const fs::path dir = fs::temp_directory_path() / ("seqac_cli_" + name);
  static std::string created;
  if (created != name) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    created = name;
  }
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Runs the CLI with stdout captured; stderr goes to a side file.
Outcome run(const std::string& args) {
  const fs::path out = work_dir() / "stdout.txt";
  const std::string cmd = std::string(SEQAC_CLI_PATH) + " " + args + " > " + out.string() + " 2> " +
                          (work_dir() / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out)};
}

// Tiny toy-task run settings shared by the training tests.
std::string toy_sets(const std::string& out_dir) {
  return "--set task=toy --set toy_lines=40 --set embed=4 --set hidden=6 --set batch_size=4 "
         "--set ll_max_steps=10 --set ll_eval_every=5 --set critic_max_steps=8 --set joint_steps=8 "
         "--set eval_every=4 --set eval_size=8 --set log_every=2 --set valid_size=8 --set test_size=8 "
         "--set out_dir=" + out_dir;
}

}  // namespace

TEST(Cli, HelpAndUnknownCommands) {
  EXPECT_EQ(run("--help").code, 0);
  EXPECT_NE(run("frobnicate").code, 0);
}

TEST(Cli, DumpConfigRoundTrips) {
  const Outcome o = run("train --mode ac --dump-config --set seed=5 --set rho=0.5");
  ASSERT_EQ(o.code, 0);
  const RunConfig c = parse_config(o.out);
  EXPECT_EQ(c.train.mode, TrainMode::kActorCritic);
  EXPECT_EQ(c.train.seed, 5u);
  EXPECT_EQ(c.decode.rho, 0.5);
  EXPECT_EQ(dump_config(c), o.out);
}

TEST(Cli, ConfigErrorsExitWithTwo) {
  EXPECT_EQ(run("train --mode ll --dump-config --set colour=blue").code, 2);
  EXPECT_EQ(run("train --mode ll --dump-config --set gamma_theta=7").code, 2);
  // Reinforcement modes need a pretrained checkpoint or an explicit full pipeline.
  EXPECT_EQ(run("train --mode ac " + toy_sets((work_dir() / "refused").string())).code, 2);
}

TEST(Cli, OracleCheckReportsAndExitsCleanly) {
  const fs::path report = work_dir() / "oracle.json";
  const Outcome o = run("oracle-check --suite bellman --out " + report.string());
  ASSERT_EQ(o.code, 0);
  const auto j = nlohmann::json::parse(slurp(report));
  EXPECT_TRUE(j.at("passed").get<bool>());
  EXPECT_NE(run("oracle-check --suite nonsense").code, 0);
}

TEST(Cli, TrainEvaluateDecodeInspect) {
  const fs::path dir = work_dir() / "ac";
  ASSERT_EQ(run("train --mode ac --full-pipeline " + toy_sets(dir.string())).code, 0);
  for (const char* f : {"config.txt", "metrics.jsonl", "ll.seqc", "critic.seqc", "ac.seqc", "final.seqc"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const std::string ckpt = (dir / "final.seqc").string();
  const Checkpoint c = load_checkpoint(ckpt);
  EXPECT_NE(c.config.find("mode=ac"), std::string::npos);

  const Outcome info = run("ckpt-info " + ckpt + " --config");
  EXPECT_EQ(info.code, 0);
  EXPECT_NE(info.out.find("mode=ac"), std::string::npos);

  const Outcome ev = run("evaluate --checkpoint " + ckpt + " --split test --decode beam --beam 3");
  ASSERT_EQ(ev.code, 0);
  const auto j = nlohmann::json::parse(ev.out);
  EXPECT_EQ(j.at("examples"), 8);
  EXPECT_EQ(j.at("decode").at("width"), 3);
  const double cer = j.at("cer").get<double>();
  EXPECT_GE(cer, 0.0);

  const fs::path input = work_dir() / "input.txt";
  std::ofstream(input) << "abc\nba\n";
  const fs::path decoded = work_dir() / "decoded.txt";
  ASSERT_EQ(run("decode --checkpoint " + ckpt + " --input " + input.string() + " --output " + decoded.string()).code, 0);
  std::istringstream lines(slurp(decoded));
  int count = 0;
  for (std::string line; std::getline(lines, line);) ++count;
  EXPECT_EQ(count, 2);

  const Outcome ic = run("inspect-critic --checkpoint " + ckpt + " --source abc --target abc --top-k 2");
  EXPECT_EQ(ic.code, 0);
  EXPECT_NE(ic.out.find("step 0"), std::string::npos);

  const fs::path csv = work_dir() / "td.csv";
  ASSERT_EQ(run("curves --metrics " + (dir / "metrics.jsonl").string() + " --metric td_error --out " + csv.string()).code, 0);
  EXPECT_EQ(slurp(csv).rfind("phase,split,step,value\n", 0), 0u);
  EXPECT_NE(run("curves --metrics " + (dir / "metrics.jsonl").string() + " --metric nope").code, 0);
}

TEST(Cli, IdenticalSeedsGiveIdenticalMetrics) {
  const fs::path a = work_dir() / "rep_a", b = work_dir() / "rep_b";
  ASSERT_EQ(run("train --mode ll " + toy_sets(a.string())).code, 0);
  ASSERT_EQ(run("train --mode ll " + toy_sets(b.string())).code, 0);
  const std::string ma = slurp(a / "metrics.jsonl");
  EXPECT_FALSE(ma.empty());
  EXPECT_EQ(ma, slurp(b / "metrics.jsonl"));
  EXPECT_EQ(slurp(a / "final.seqc").substr(0, 4), "SEQC");

  // Continuing from the log-likelihood checkpoint runs only the remaining phases.
  const fs::path c = work_dir() / "resumed";
  ASSERT_EQ(run("train --mode reinforce --resume " + (a / "ll.seqc").string() + " " + toy_sets(c.string())).code, 0);
  const std::string mc = slurp(c / "metrics.jsonl");
  EXPECT_EQ(mc.find("\"phase\":\"ll\""), std::string::npos);
  EXPECT_NE(mc.find("\"phase\":\"reinforce\""), std::string::npos);
}
