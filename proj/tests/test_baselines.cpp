#include <gtest/gtest.h>

#include "dwpi/baselines.hpp"
#include "dwpi/error.hpp"
#include "test_util.hpp"

using namespace dwpi;
using dwpi::testing::default_cdst;

namespace {

TrainConfig inner_config() {
  TrainConfig c;
  c.episodes = 20'000;
  c.q_init = 30.0;
  c.seed = 7;
  return c;
}

BaselineConfig config_for(const EnvSpec& spec, SolverMode mode, std::size_t iterations) {
  BaselineConfig c;
  c.iterations = iterations;
  c.inner = inner_config();
  c.solver = mode;
  c.seed = 3;
  set_return_bounds(c, spec);
  return c;
}

void expect_simplex(const PreferenceVector& w) {
  double s = 0.0;
  for (double v : w.weights()) {
    EXPECT_GE(v, 0.0);
    s += v;
  }
  EXPECT_NEAR(s, 1.0, 1e-9);
}

}  // namespace

TEST(FeatureExpectation, MatchesOracleOnCdst) {
  const auto spec = default_cdst();
  for (const auto& w : {PreferenceVector{0.0, 1.0}, PreferenceVector{1.0, 0.0}, PreferenceVector{0.5, 0.5}}) {
    EXPECT_EQ(feature_expectation(spec, w, inner_config()), oracle_best(spec, w)) << w[0];
  }
}

TEST(FeatureExpectation, DegenerateAndDeterministic) {
  const auto one = dwpi::testing::one_treasure_cdst();
  EXPECT_EQ(feature_expectation(one, PreferenceVector{0.4, 0.6}, inner_config()), (RewardVector{5.0, -1.0}));
  const auto spec = default_cdst();
  const PreferenceVector w{0.3, 0.7};
  EXPECT_EQ(feature_expectation(spec, w, inner_config()), feature_expectation(spec, w, inner_config()));
}

TEST(BaselineConfig, Validation) {
  const auto spec = default_cdst();
  auto c = config_for(spec, SolverMode::Oracle, 10);
  EXPECT_NO_THROW(c.validate(2));
  EXPECT_THROW(c.validate(3), ConfigError);
  auto bad = c;
  bad.iterations = 0;
  EXPECT_THROW(bad.validate(2), ConfigError);
  bad = c;
  bad.upper[0] = bad.lower[0];
  EXPECT_THROW(bad.validate(2), ConfigError);
  bad = c;
  bad.mwal_beta = 1.0;
  EXPECT_THROW(bad.validate(2), ConfigError);
  bad = c;
  bad.mwal_beta.reset();
  EXPECT_NEAR(bad.beta(2), 1.0 / (1.0 + std::sqrt(2.0 * std::log(2.0) / 10.0)), 1e-15);
}

TEST(Pm, SingleIterationIsInitialDirection) {
  const auto spec = default_cdst();
  const auto cfg = config_for(spec, SolverMode::Oracle, 1);
  const RewardVector demo{20.0, -6.0};
  const auto r = pm_infer(spec, demo, cfg);
  const auto expect = PreferenceVector::normalized(
      std::vector<double>{demo[0] - cfg.lower[0], demo[1] - cfg.lower[1]});
  EXPECT_EQ(r.iterations_used, 1u);
  EXPECT_NEAR(r.inferred[0], expect[0], 1e-15);
  EXPECT_NEAR(r.inferred[1], expect[1], 1e-15);
}

TEST(Pm, RecoversPureTreasureWeight) {
  const auto spec = default_cdst();
  const auto demo = feature_expectation(spec, PreferenceVector{1.0, 0.0}, inner_config());
  const auto r = pm_infer(spec, demo, config_for(spec, SolverMode::QLearning, 50));
  EXPECT_EQ(PreferenceSpace(2, 0.1).snap(r.inferred), (PreferenceVector{1.0, 0.0}));
}

TEST(Pm, MarginNonIncreasing) {
  const auto spec = default_cdst();
  const PreferenceSpace space(2, 0.1);
  for (const auto& w : space.points()) {
    const auto r = pm_infer(spec, oracle_best(spec, w), config_for(spec, SolverMode::Oracle, 300));
    for (std::size_t i = 1; i < r.history.size(); ++i) {
      EXPECT_LE(r.history[i].margin, r.history[i - 1].margin + 1e-12);
    }
    expect_simplex(r.inferred);
  }
}

TEST(Pm, ClosedLoopUtilityEquivalent) {
  const auto spec = default_cdst();
  const PreferenceSpace space(2, 0.1);
  for (const auto& w : space.points()) {
    const auto demo = oracle_best(spec, w);
    const auto r = pm_infer(spec, demo, config_for(spec, SolverMode::Oracle, 1000));
    EXPECT_EQ(oracle_best(spec, r.inferred), demo) << "w0=" << w[0];
  }
}

TEST(Pm, DominatedDemoIsAnError) {
  const auto spec = default_cdst();
  const auto cfg = config_for(spec, SolverMode::Oracle, 5);
  EXPECT_THROW(pm_infer(spec, RewardVector{cfg.lower[0] - 1, cfg.lower[1] - 1}, cfg), Error);
  EXPECT_THROW(pm_infer(spec, RewardVector{1.0, 2.0, 3.0}, cfg), ConfigError);
}

TEST(Mwal, UpdateExamples) {
  const auto w = mwal_update(std::vector<double>{1, 1}, std::vector<double>{1, 0}, 0.5);
  EXPECT_NEAR(w[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(w[1], 2.0 / 3.0, 1e-15);
  const auto u = mwal_update(std::vector<double>{0.5, 0.5}, std::vector<double>{1, 0}, 1.0 - 1e-12);
  EXPECT_NEAR(u[0], 0.5, 1e-9);
}

TEST(Mwal, WeightsStayPositive) {
  const auto spec = default_cdst();
  const auto r = mwal_infer(spec, oracle_best(spec, PreferenceVector{1.0, 0.0}),
                            config_for(spec, SolverMode::Oracle, 500));
  for (const auto& h : r.history) {
    for (double v : h.raw_weight) EXPECT_GT(v, 0.0);
  }
  expect_simplex(r.inferred);
}

TEST(Mwal, MajorityOfLatticeWithLearnedSolver) {
  const auto spec = default_cdst();
  const PreferenceSpace space(2, 0.1);
  std::size_t hits = 0;
  for (const auto& w : space.points()) {
    const auto demo = feature_expectation(spec, w, inner_config());
    const auto r = mwal_infer(spec, demo, config_for(spec, SolverMode::QLearning, 50));
    if (space.snap(r.inferred) == w) ++hits;
  }
  EXPECT_GT(hits, space.size() / 2);
}

TEST(Mwal, ClosedLoopUtilityEquivalent) {
  const auto spec = default_cdst();
  const PreferenceSpace space(2, 0.1);
  for (const auto& w : space.points()) {
    const auto demo = oracle_best(spec, w);
    const auto r = mwal_infer(spec, demo, config_for(spec, SolverMode::Oracle, 200));
    EXPECT_EQ(oracle_best(spec, r.inferred), demo) << "w0=" << w[0];
  }
}

TEST(Mwal, BoundsViolationNamesObjective) {
  const auto spec = default_cdst();
  const auto cfg = config_for(spec, SolverMode::Oracle, 5);
  try {
    mwal_infer(spec, RewardVector{10.0, cfg.lower[1] - 5.0}, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("objective 1"), std::string::npos) << e.what();
  }
}

TEST(BaselineResult, JsonCarriesHistory) {
  const auto spec = default_cdst();
  const auto r = pm_infer(spec, RewardVector{20.0, -6.0}, config_for(spec, SolverMode::Oracle, 4));
  const auto j = to_json(r);
  EXPECT_EQ(j.at("method"), "pm");
  EXPECT_EQ(j.at("history").size(), r.history.size());
  EXPECT_EQ(j.at("inferred").get<PreferenceVector>(), r.inferred);
}
