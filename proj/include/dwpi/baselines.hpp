#ifndef DWPI_BASELINES_HPP
#define DWPI_BASELINES_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dwpi/env.hpp"
#include "dwpi/preference.hpp"
#include "dwpi/q_learning.hpp"

namespace dwpi {

// How a baseline turns a candidate weight into a feature expectation.
enum class SolverMode {
  QLearning,  // fresh single-preference tabular Q-learner per call
  Oracle,     // exact best attainable return; for closed-loop checks
};

struct BaselineConfig {
  std::size_t iterations = 50;
  TrainConfig inner;
  // Unset: 1 / (1 + sqrt(2 ln m / T)).
  std::optional<double> mwal_beta = 0.05;
  std::vector<double> lower;  // per-objective return bounds
  std::vector<double> upper;
  double pm_tolerance = 1e-6;
  SolverMode solver = SolverMode::QLearning;
  std::uint64_t seed = 0;

  void validate(std::size_t m) const;
  [[nodiscard]] double beta(std::size_t m) const;
};

// Attainable return range widened by `margin` times its width on each side.
void set_return_bounds(BaselineConfig& cfg, const EnvSpec& spec, double margin = 0.1);

struct BaselineIteration {
  std::vector<double> raw_weight;  // before clipping (PM) or normalization (MWAL)
  PreferenceVector weight;         // the weight handed to the solver
  ReturnSummary feature_expectation;
  double margin = 0.0;  // PM: |mu_E - mu_bar|; MWAL: unused
};

struct BaselineResult {
  std::string method;
  PreferenceVector inferred;
  std::size_t iterations_used = 0;
  double wall_seconds = 0.0;
  std::vector<BaselineIteration> history;
};

nlohmann::json to_json(const BaselineResult& r);

// Trains a fresh Q-learner on scalarize(w, .) only and returns the undiscounted
// return of its greedy episode.
ReturnSummary feature_expectation(const EnvSpec& spec, const PreferenceVector& w, const TrainConfig& cfg);

BaselineResult pm_infer(const EnvSpec& spec, const ReturnSummary& demo, const BaselineConfig& cfg);
BaselineResult mwal_infer(const EnvSpec& spec, const ReturnSummary& demo, const BaselineConfig& cfg);

// One multiplicative step, W(i) * beta^G(i), rescaled to unit sum.
std::vector<double> mwal_update(std::span<const double> W, std::span<const double> G, double beta);

}  // namespace dwpi

#endif  // DWPI_BASELINES_HPP
