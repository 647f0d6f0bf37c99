#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dwpi/config.hpp"
#include "dwpi/error.hpp"
#include "test_util.hpp"

using namespace dwpi;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(DWPI_CLI_PATH) + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) throw std::runtime_error("popen failed");
  std::string out;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), p)) out += buf.data();
  const int status = pclose(p);
  return {WEXITSTATUS(status), out};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::string config_path() { return (fs::path(DWPI_SOURCE_DIR) / "configs" / "cdst.json").string(); }

// Small, fast settings shared by every CLI test.
const std::string kFast =
    " --set demos.n=300 --set model.max_epochs=30 --set model.learning_rate=0.05"
    " --set baselines.iterations=10 --set baselines.solver=oracle --set eval.max_queries=5";

}  // namespace

TEST(Config, ParsesDefaultsAndOverrides) {
  auto j = read_json_file(config_path());
  apply_override(j, "demos.n=123");
  apply_override(j, "model.loss=l2");
  apply_override(j, "baselines.mwal_beta=auto");
  const auto c = run_config_from_json(j, fs::path(config_path()).parent_path());
  EXPECT_EQ(c.demos.n, 123u);
  EXPECT_EQ(c.model.fit.loss_kind, LossKind::L2);
  EXPECT_FALSE(c.baseline.mwal_beta.has_value());
  EXPECT_TRUE(fs::exists(c.layout_path));
  EXPECT_DOUBLE_EQ(c.agent.q_init, 30.0);
  // The echoed config parses back to the same hashes.
  const auto again = run_config_from_json(to_json(c));
  EXPECT_EQ(run_config_hash(again), run_config_hash(c));
}

TEST(Config, Errors) {
  auto j = read_json_file(config_path());
  auto no_seed = j;
  no_seed.erase("seed");
  EXPECT_THROW(run_config_from_json(no_seed), ConfigError);
  auto typo = j;
  typo["demos"]["nn"] = 5;
  EXPECT_THROW(run_config_from_json(typo), ConfigError);
  EXPECT_THROW(apply_override(j, "novalue"), ConfigError);
  EXPECT_THROW(read_json_file("/nonexistent/cfg.json"), ConfigError);
}

TEST(Config, HashesFollowTheirInputs) {
  const auto j = read_json_file(config_path());
  const auto a = run_config_from_json(j, fs::path(config_path()).parent_path());
  auto j2 = j;
  j2["seed"] = 99;
  const auto b = run_config_from_json(j2, fs::path(config_path()).parent_path());
  const auto spec = load_env(a);
  EXPECT_NE(agent_config_hash(a, spec), agent_config_hash(b, spec));
  EXPECT_NE(stage_seed(a, Stage::Demos), stage_seed(a, Stage::Split));
  auto j3 = j;
  j3["model"]["max_epochs"] = 7;
  const auto c = run_config_from_json(j3, fs::path(config_path()).parent_path());
  EXPECT_EQ(agent_config_hash(a, spec), agent_config_hash(c, spec));
  EXPECT_NE(model_config_hash(a, 1), model_config_hash(c, 1));
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  const auto bad = run("infer --model /nonexistent.bin --features 'x,y'");
  EXPECT_NE(bad.code, 0);
}

TEST(Cli, MissingLayoutNamesPath) {
  const auto dir = dwpi::testing::scratch_dir("cli_layout");
  const auto r = run("train-agent --config " + config_path() + " --out " + dir.string() +
                     " --set environment.layout=/nowhere/layout.json");
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.out.find("/nowhere/layout.json"), std::string::npos) << r.out;
}

TEST(Cli, PipelineEndToEnd) {
  const auto dir = dwpi::testing::scratch_dir("cli_pipeline");
  const std::string base = " --config " + config_path() + kFast;
  auto a = run("train-agent" + base + " --out " + (dir / "a").string());
  ASSERT_EQ(a.code, 0) << a.out;
  EXPECT_NE(a.out.find("oracle match: 100%"), std::string::npos) << a.out;
  ASSERT_EQ(run("train-agent" + base + " --out " + (dir / "b").string()).code, 0);
  EXPECT_EQ(slurp(dir / "a/agent.qtab"), slurp(dir / "b/agent.qtab"));
  EXPECT_TRUE(fs::exists(dir / "a/agent.qtab.json"));
  EXPECT_TRUE(fs::exists(dir / "a/config.json"));

  const std::string agent = (dir / "a/agent.qtab").string();
  ASSERT_EQ(run("gen-demos" + base + " --out " + (dir / "a").string() + " --agent " + agent).code, 0);
  ASSERT_EQ(run("gen-demos" + base + " --out " + (dir / "b").string() + " --agent " + agent).code, 0);
  ASSERT_EQ(run("gen-demos" + base + " --out " + (dir / "a").string() + " --agent " + agent + " --eta 0.05").code, 0);
  const auto demos0 = dir / "a/demos_eta0.jsonl";
  EXPECT_EQ(slurp(demos0), slurp(dir / "b/demos_eta0.jsonl"));
  {
    std::ifstream in(demos0);
    std::string line;
    std::getline(in, line);
    int rows = 0;
    while (std::getline(in, line)) {
      const auto j = nlohmann::json::parse(line);
      EXPECT_EQ(j.at("noise_eta"), 0.0);
      ++rows;
    }
    EXPECT_EQ(rows, 300);
  }

  // Demo generation refuses an agent produced under a different seed.
  EXPECT_EQ(run("gen-demos" + base + " --seed 77 --out " + (dir / "c").string() + " --agent " + agent).code, 1);

  ASSERT_EQ(run("train-dwpi" + base + " --out " + (dir / "a").string() + " --demos " + demos0.string()).code, 0);
  ASSERT_EQ(run("train-dwpi" + base + " --out " + (dir / "b").string() + " --demos " + demos0.string()).code, 0);
  EXPECT_EQ(slurp(dir / "a/model_demos_eta0.bin"), slurp(dir / "b/model_demos_eta0.bin"));
  EXPECT_TRUE(fs::exists(dir / "a/loss_demos_eta0.csv"));
  const auto demos5 = dir / "a/demos_eta0.05.jsonl";
  ASSERT_EQ(run("train-dwpi" + base + " --out " + (dir / "a").string() + " --demos " + demos5.string()).code, 0);

  const auto inf = run("infer --model " + (dir / "a/model_demos_eta0.bin").string() + " --features [26.9,-19]");
  ASSERT_EQ(inf.code, 0) << inf.out;
  const auto j = nlohmann::json::parse(inf.out);
  EXPECT_EQ(j.at("raw").size(), 2u);
  EXPECT_EQ(j.at("snapped").size(), 2u);
  EXPECT_EQ(run("infer --model " + (dir / "a/model_demos_eta0.bin").string() + " --features [1,2,3]").code, 1);
  EXPECT_EQ(run("infer --model " + (dir / "a/model_demos_eta0.bin").string() + " --features abc").code, 1);

  const auto bl = run("baseline pm" + base + " --features [19.1,-5]");
  ASSERT_EQ(bl.code, 0) << bl.out;
  EXPECT_EQ(nlohmann::json::parse(bl.out).at("method"), "pm");

  const std::string pairs = " --agent " + agent + " --demos " + demos0.string() + " --model " +
                            (dir / "a/model_demos_eta0.bin").string() + " --demos " + demos5.string() + " --model " +
                            (dir / "a/model_demos_eta0.05.bin").string();
  const auto ev = run("eval" + base + " --out " + (dir / "a/eval").string() + pairs);
  ASSERT_EQ(ev.code, 0) << ev.out;
  for (const char* f : {"report.json", "metrics.csv", "timing.csv"}) EXPECT_TRUE(fs::exists(dir / "a/eval" / f)) << f;
  const auto rep = nlohmann::json::parse(slurp(dir / "a/eval/report.json"));
  EXPECT_TRUE(rep.contains("config_hash"));
  EXPECT_TRUE(rep.contains("seed"));
  EXPECT_EQ(rep.at("regimes").size(), 2u);

  // Mismatched pairs are refused.
  const auto swapped = " --agent " + agent + " --demos " + demos0.string() + " --model " +
                       (dir / "a/model_demos_eta0.05.bin").string();
  EXPECT_EQ(run("eval" + base + " --out " + (dir / "a/eval2").string() + swapped).code, 1);

  // An untrained model loses to oracle-backed baselines: the assertion flag turns that into exit 3.
  ASSERT_EQ(run("train-dwpi" + base + " --set model.max_epochs=0 --out " + (dir / "u").string() + " --demos " +
                demos0.string())
                .code,
            0);
  const auto lose = run("eval" + base + " --out " + (dir / "u/eval").string() + " --agent " + agent + " --demos " +
                        demos0.string() + " --model " + (dir / "u/model_demos_eta0.bin").string() +
                        " --assert-dwpi-wins");
  EXPECT_EQ(lose.code, 3) << lose.out;
}

TEST(Cli, CorruptDemosNamesLine) {
  const auto dir = dwpi::testing::scratch_dir("cli_corrupt");
  const std::string base = " --config " + config_path() + kFast + " --out " + dir.string();
  ASSERT_EQ(run("train-agent" + base).code, 0);
  ASSERT_EQ(run("gen-demos" + base + " --agent " + (dir / "agent.qtab").string()).code, 0);
  std::string text = slurp(dir / "demos_eta0.jsonl");
  std::size_t pos = 0;
  for (int i = 0; i < 6; ++i) pos = text.find('\n', pos) + 1;
  text.replace(pos, 10, "garbage!!!");
  std::ofstream(dir / "bad.jsonl", std::ios::binary) << text;
  const auto r = run("train-dwpi" + base + " --demos " + (dir / "bad.jsonl").string());
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.out.find("bad.jsonl:7:"), std::string::npos) << r.out;
}
