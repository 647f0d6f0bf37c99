#include "dwpi/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "dwpi/error.hpp"

namespace dwpi {

namespace {

constexpr std::uint64_t kInnerStream = 0xba5e;

// Solves for the feature expectation of candidate weight `w` at iteration `it`.
ReturnSummary solve(const EnvSpec& spec, const PreferenceVector& w, const BaselineConfig& cfg, std::size_t it) {
  if (cfg.solver == SolverMode::Oracle) return oracle_best(spec, w);
  TrainConfig inner = cfg.inner;
  inner.seed = derive_seed(cfg.seed, kInnerStream, it);
  return feature_expectation(spec, w, inner);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void check_demo(const EnvSpec& spec, const ReturnSummary& demo) {
  if (demo.size() != spec.objectives()) throw ConfigError("demo has the wrong number of objectives");
  if (!demo.all_finite()) throw ConfigError("demo return is not finite");
}

}  // namespace

void BaselineConfig::validate(std::size_t m) const {
  if (iterations < 1) throw ConfigError("baseline: iterations must be >= 1");
  if (mwal_beta && !(*mwal_beta > 0.0 && *mwal_beta < 1.0)) throw ConfigError("baseline: mwal_beta must be in (0,1)");
  if (lower.size() != m || upper.size() != m) throw ConfigError("baseline: return bounds must have one entry per objective");
  for (std::size_t i = 0; i < m; ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || !(upper[i] > lower[i])) {
      throw ConfigError("baseline: return bounds for objective " + std::to_string(i) + " must be finite with max > min");
    }
  }
  if (!(pm_tolerance >= 0.0)) throw ConfigError("baseline: pm_tolerance must be >= 0");
  if (solver == SolverMode::QLearning) inner.validate();
}

double BaselineConfig::beta(std::size_t m) const {
  if (mwal_beta) return *mwal_beta;
  return 1.0 / (1.0 + std::sqrt(2.0 * std::log(static_cast<double>(m)) / static_cast<double>(iterations)));
}

void set_return_bounds(BaselineConfig& cfg, const EnvSpec& spec, double margin) {
  const auto entries = attainable_returns(spec);
  const std::size_t m = spec.objectives();
  cfg.lower.assign(m, 0.0);
  cfg.upper.assign(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double lo = entries.front().returns[i], hi = lo;
    for (const auto& e : entries) {
      lo = std::min(lo, e.returns[i]);
      hi = std::max(hi, e.returns[i]);
    }
    const double width = hi > lo ? hi - lo : 1.0;
    cfg.lower[i] = lo - margin * width;
    cfg.upper[i] = hi + margin * width;
  }
}

ReturnSummary feature_expectation(const EnvSpec& spec, const PreferenceVector& w, const TrainConfig& cfg) {
  if (w.size() != spec.objectives()) throw ConfigError("feature_expectation: weight has the wrong dimension");
  const std::vector<PreferenceVector> one{w};
  const auto q = q_learning(spec, std::span<const PreferenceVector>(one), cfg, cfg.discount_for(spec.discount()));
  return greedy_episode(spec, q, 1, 0);
}

std::vector<double> mwal_update(std::span<const double> W, std::span<const double> G, double beta) {
  if (W.size() != G.size()) throw ConfigError("mwal_update: size mismatch");
  std::vector<double> out(W.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < W.size(); ++i) {
    out[i] = W[i] * std::pow(beta, G[i]);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

BaselineResult pm_infer(const EnvSpec& spec, const ReturnSummary& demo, const BaselineConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t m = spec.objectives();
  cfg.validate(m);
  check_demo(spec, demo);

  std::vector<double> mu_bar = cfg.lower;
  auto direction = [&] {
    std::vector<double> d(m);
    for (std::size_t i = 0; i < m; ++i) d[i] = demo[i] - mu_bar[i];
    return d;
  };
  std::vector<double> raw = direction();
  std::optional<PreferenceVector> w;
  try {
    w = PreferenceVector::normalized(raw);
  } catch (const ConfigError&) {
    throw Error("pm: demo return dominates nothing above the lower bounds; no candidate weight");
  }

  BaselineResult res{"pm", *w, 0, 0.0, {}};
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const ReturnSummary mu = solve(spec, *w, cfg, it);
    std::vector<double> d(m), gap = direction();
    double dd = 0.0, dg = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      d[i] = mu[i] - mu_bar[i];
      dd += d[i] * d[i];
      dg += d[i] * gap[i];
    }
    const double t = dd < 1e-18 ? 0.0 : std::clamp(dg / dd, 0.0, 1.0);
    for (std::size_t i = 0; i < m; ++i) mu_bar[i] += t * d[i];
    const double margin = std::sqrt(squared_distance(demo.values(), mu_bar));
    res.history.push_back({raw, *w, mu, margin});
    res.inferred = *w;
    res.iterations_used = it + 1;
    if (margin < cfg.pm_tolerance) break;
    raw = direction();
    if (std::none_of(raw.begin(), raw.end(), [](double v) { return v > 0.0; })) break;
    w = PreferenceVector::normalized(raw);
  }
  res.wall_seconds = seconds_since(t0);
  return res;
}

BaselineResult mwal_infer(const EnvSpec& spec, const ReturnSummary& demo, const BaselineConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t m = spec.objectives();
  cfg.validate(m);
  check_demo(spec, demo);
  auto check_bounds = [&](const ReturnSummary& r, const char* what) {
    for (std::size_t i = 0; i < m; ++i) {
      if (r[i] < cfg.lower[i] || r[i] > cfg.upper[i]) {
        throw Error(std::string("mwal: ") + what + " return " + std::to_string(r[i]) + " for objective " +
                    std::to_string(i) + " lies outside the bounds [" + std::to_string(cfg.lower[i]) + ", " +
                    std::to_string(cfg.upper[i]) + "]");
      }
    }
  };
  check_bounds(demo, "demo");
  const double beta = cfg.beta(m);

  std::vector<double> W(m, 1.0 / static_cast<double>(m));
  std::vector<double> mean(m, 0.0);
  BaselineResult res{"mwal", PreferenceVector::uniform(m), 0, 0.0, {}};
  std::vector<double> G(m);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const PreferenceVector w(W);
    const ReturnSummary mu = solve(spec, w, cfg, it);
    check_bounds(mu, "learner");
    // Objectives the learner already over-delivers on relative to the demo lose weight.
    for (std::size_t i = 0; i < m; ++i) G[i] = ((mu[i] - demo[i]) / (cfg.upper[i] - cfg.lower[i]) + 1.0) / 2.0;
    res.history.push_back({W, w, mu, 0.0});
    for (std::size_t i = 0; i < m; ++i) mean[i] += w[i];
    W = mwal_update(W, G, beta);
    res.iterations_used = it + 1;
  }
  for (double& v : mean) v /= static_cast<double>(res.iterations_used);
  res.inferred = PreferenceVector::normalized(mean);
  res.wall_seconds = seconds_since(t0);
  return res;
}

nlohmann::json to_json(const BaselineResult& r) {
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& h : r.history) {
    hist.push_back({{"raw_weight", h.raw_weight},
                    {"weight", h.weight},
                    {"feature_expectation", h.feature_expectation},
                    {"margin", h.margin}});
  }
  return {{"method", r.method},
          {"inferred", r.inferred},
          {"iterations_used", r.iterations_used},
          {"wall_seconds", r.wall_seconds},
          {"history", hist}};
}

}  // namespace dwpi
