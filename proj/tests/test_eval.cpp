#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "dwpi/error.hpp"
#include "dwpi/eval.hpp"
#include "test_util.hpp"

using namespace dwpi;
using dwpi::testing::trained_cdst;

TEST(Kl, Examples) {
  const PreferenceVector p{0.3, 0.7};
  EXPECT_NEAR(kl_metric(p, p), 0.0, 1e-15);
  EXPECT_NEAR(kl_metric(PreferenceVector{1.0, 0.0}, PreferenceVector{0.5, 0.5}), std::log(2.0), 1e-6);
  EXPECT_NEAR(kl_metric(PreferenceVector{0.7, 0.3}, PreferenceVector{0.6, 0.4}),
              0.7 * std::log(7.0 / 6.0) + 0.3 * std::log(0.75), 1e-7);
  EXPECT_TRUE(std::isfinite(kl_metric(PreferenceVector{0.5, 0.5}, PreferenceVector{1.0, 0.0})));
}

TEST(Kl, NonNegativeAndAsymmetric) {
  Rng rng(1);
  bool asym = false;
  for (int t = 0; t < 500; ++t) {
    const auto a = PreferenceVector::normalized(std::vector<double>{rng.uniform(), rng.uniform(), rng.uniform()});
    const auto b = PreferenceVector::normalized(std::vector<double>{rng.uniform(), rng.uniform(), rng.uniform()});
    EXPECT_GE(kl_metric(a, b), 0.0);
    if (std::abs(kl_metric(a, b) - kl_metric(b, a)) > 1e-6) asym = true;
    EXPECT_DOUBLE_EQ(mse_metric(a, b), mse_metric(b, a));
  }
  EXPECT_TRUE(asym);
}

TEST(Mse, Examples) {
  EXPECT_DOUBLE_EQ(mse_metric(PreferenceVector{0.2, 0.8}, PreferenceVector{0.2, 0.8}), 0.0);
  EXPECT_DOUBLE_EQ(mse_metric(PreferenceVector{1.0, 0.0}, PreferenceVector{0.0, 1.0}), 1.0);
  EXPECT_NEAR(mse_metric(PreferenceVector{0.7, 0.3}, PreferenceVector{0.6, 0.4}), 0.01, 1e-15);
}

TEST(Utility, ZeroWhenSnappedWeightsCoincide) {
  const QTable& q = trained_cdst();
  const PreferenceVector w{0.3, 0.7};
  EXPECT_EQ(utility_metric(q, w, w), 0.0);
  EXPECT_EQ(utility_metric(q, w, PreferenceVector{0.32, 0.68}), 0.0);
}

TEST(Utility, MatchesOracleArithmetic) {
  const QTable& q = trained_cdst();
  const PreferenceVector w{0.0, 1.0};
  // Nearest treasure (1.3, -1) vs richest (26.9, -19), judged by w = [0,1].
  EXPECT_DOUBLE_EQ(utility_metric(q, w, PreferenceVector{1.0, 0.0}), 18.0);
  EXPECT_DOUBLE_EQ(oracle_utility_metric(q.spec(), w, PreferenceVector{1.0, 0.0}), 18.0);
}

TEST(Utility, NeverNegativeOnLattice) {
  const QTable& q = trained_cdst();
  for (const auto& w : q.space().points()) {
    for (const auto& v : q.space().points()) {
      EXPECT_GE(utility_gap(q, w, v), -1e-6);
      EXPECT_GE(utility_metric(q, w, v), 0.0);
    }
  }
}

TEST(Summarize, InvariantToOrder) {
  std::vector<QueryRecord> recs;
  Rng rng(5);
  for (std::size_t i = 0; i < 40; ++i) {
    QueryRecord r;
    r.method = Method::Pm;
    r.regime = "optimal";
    r.demo_index = i;
    r.kl = rng.uniform() * 1e-3 + (i % 7) * 10.0;
    r.mse = rng.uniform();
    r.squared_l2 = rng.uniform();
    r.utility_loss = rng.uniform() * 1e5;
    r.seconds = rng.uniform();
    r.ok = i != 13;
    recs.push_back(r);
  }
  const auto a = summarize(Method::Pm, "optimal", 0.0, recs);
  std::reverse(recs.begin(), recs.end());
  Rng shuf(2);
  shuffle(recs, shuf);
  const auto b = summarize(Method::Pm, "optimal", 0.0, recs);
  EXPECT_EQ(a.mean_kl, b.mean_kl);
  EXPECT_EQ(a.mean_mse, b.mean_mse);
  EXPECT_EQ(a.mean_utility_loss, b.mean_utility_loss);
  EXPECT_EQ(a.median_seconds, b.median_seconds);
  EXPECT_EQ(a.failed, 1u);
  EXPECT_EQ(a.queries, 40u);
}

TEST(Benchmark, SmallCdstRun) {
  const QTable& q = trained_cdst();
  const NoiseSpec noise(0.0, return_ranges(q.spec()));
  auto ds = split(generate_demos(q, q.space(), noise, 600, 1), {0.8, 0.1, 0.1}, 2);
  const auto model = make_model(ds, std::vector<std::size_t>{16, 16}, 3);
  FitConfig fc;
  fc.max_epochs = 60;
  fc.learning_rate = 0.05;
  const auto trained = fit(model, ds, fc).model;

  EvalConfig ec;
  ec.baseline.iterations = 20;
  ec.baseline.solver = SolverMode::Oracle;
  set_return_bounds(ec.baseline, q.spec());
  ec.max_queries = 8;
  const std::vector<RegimeInput> regimes{{&ds, &trained, 1.5}};
  const auto rep = benchmark(q, regimes, ec);
  EXPECT_EQ(rep.failed_queries(), 0u);
  ASSERT_EQ(rep.summaries.size(), 3u);
  for (const auto& s : rep.summaries) {
    EXPECT_EQ(s.queries, 8u);
    for (double v : {s.mean_kl, s.mean_mse, s.mean_utility_loss, s.median_seconds, s.p90_seconds}) {
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_GE(v, 0.0);
    }
  }

  const auto dir = dwpi::testing::scratch_dir("eval");
  write_report(dir, rep);
  std::ifstream m(dir / "metrics.csv");
  std::string header;
  std::getline(m, header);
  EXPECT_EQ(header, "environment,method,regime,noise_eta,metric,value");
  std::ifstream t(dir / "timing.csv");
  std::getline(t, header);
  EXPECT_EQ(header, "environment,method,regime,kind,demo_index,seconds");
  const auto j = nlohmann::json::parse(std::ifstream(dir / "report.json"));
  EXPECT_EQ(j.at("summaries").size(), 3u);
  EXPECT_EQ(j.at("regimes").at(0).at("dwpi_training_seconds"), 1.5);
}

TEST(Benchmark, FailuresAreCountedNotFatal) {
  const QTable& q = trained_cdst();
  const NoiseSpec noise(0.0, return_ranges(q.spec()));
  auto ds = split(generate_demos(q, q.space(), noise, 100, 1), {0.8, 0.1, 0.1}, 2);
  const auto model = make_model(ds, std::vector<std::size_t>{4}, 3);
  EvalConfig ec;
  ec.run_pm = false;
  ec.baseline.iterations = 5;
  ec.baseline.solver = SolverMode::Oracle;
  set_return_bounds(ec.baseline, q.spec());
  // Bounds that exclude every demo make MWAL fail on each query.
  ec.baseline.upper[0] = ec.baseline.lower[0] + 1e-3;
  ec.max_queries = 4;
  const std::vector<RegimeInput> regimes{{&ds, &model, 0.0}};
  const auto rep = benchmark(q, regimes, ec);
  EXPECT_EQ(rep.summary(Method::Mwal, "optimal").failed, 4u);
  EXPECT_EQ(rep.summary(Method::Dwpi, "optimal").failed, 0u);
}

TEST(Dominance, DetectsViolation) {
  EvalReport r;
  r.regimes.push_back({"optimal", 0.0, 0, 1, 1, 0.0});
  MethodSummary d, p;
  d.method = Method::Dwpi;
  d.regime = "optimal";
  d.mean_kl = 0.1;
  p.method = Method::Pm;
  p.regime = "optimal";
  p.mean_kl = 0.2;
  r.summaries = {d, p};
  EXPECT_TRUE(dwpi_dominates(r).ok);
  r.summaries[1].mean_kl = 0.05;
  const auto c = dwpi_dominates(r);
  EXPECT_FALSE(c.ok);
  ASSERT_EQ(c.violations.size(), 1u);
  EXPECT_NE(c.violations[0].find("kl"), std::string::npos);
}
