#ifndef DWPI_EVAL_HPP
#define DWPI_EVAL_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dwpi/agent.hpp"
#include "dwpi/baselines.hpp"
#include "dwpi/demos.hpp"
#include "dwpi/mlp.hpp"

namespace dwpi {

inline constexpr double kKlEpsilon = 1e-8;

// KL(true || inferred) between the two vectors read as categorical distributions,
// each smoothed by +eps and renormalized.
double kl_metric(const PreferenceVector& true_w, const PreferenceVector& inferred, double eps = kKlEpsilon);
double mse_metric(const PreferenceVector& true_w, const PreferenceVector& inferred);

// Scalarized return lost by rolling out snap(inferred) instead of snap(true_w),
// judged under true_w. Unclipped; utility_metric clips at 0.
double utility_gap(const QTable& q, const PreferenceVector& true_w, const PreferenceVector& inferred);
double utility_metric(const QTable& q, const PreferenceVector& true_w, const PreferenceVector& inferred);
// Same quantity through the environment oracle instead of the agent, for audit.
double oracle_utility_metric(const EnvSpec& spec, const PreferenceVector& true_w, const PreferenceVector& inferred);

enum class Method { Dwpi, Pm, Mwal };
std::string_view method_name(Method m);

struct EvalConfig {
  BaselineConfig baseline;
  bool run_pm = true;
  bool run_mwal = true;
  // Caps the number of test demos queried per regime (0: all). Every method sees
  // the same demos.
  std::size_t max_queries = 0;
  std::uint64_t seed = 0;
};

struct RegimeInput {
  const DemoSet* demos = nullptr;
  const MlpModel* model = nullptr;
  double training_seconds = 0.0;  // one-time DWPI fit cost for this demo set
};

struct QueryRecord {
  Method method;
  std::string regime;
  std::size_t demo_index = 0;  // position in the demo file
  bool ok = true;
  std::string error;
  std::vector<double> target;
  std::vector<double> inferred;
  double kl = 0.0;
  double mse = 0.0;
  double squared_l2 = 0.0;
  double utility_loss = 0.0;
  double oracle_utility_loss = 0.0;
  double seconds = 0.0;
};

struct MethodSummary {
  Method method;
  std::string regime;
  double noise_eta = 0.0;
  std::size_t queries = 0;
  std::size_t failed = 0;
  double mean_kl = 0.0;
  double mean_mse = 0.0;
  double mean_squared_l2 = 0.0;
  double mean_l2 = 0.0;
  double mean_utility_loss = 0.0;
  double mean_oracle_utility_loss = 0.0;
  double median_seconds = 0.0;
  double p90_seconds = 0.0;
};

struct RegimeInfo {
  std::string name;
  double noise_eta = 0.0;
  std::uint64_t demos_hash = 0;
  std::size_t test_demos = 0;
  std::size_t queried = 0;
  double dwpi_training_seconds = 0.0;
};

struct EvalReport {
  nlohmann::json environment;
  std::vector<RegimeInfo> regimes;
  std::vector<MethodSummary> summaries;
  std::vector<QueryRecord> queries;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;

  [[nodiscard]] const MethodSummary& summary(Method m, const std::string& regime) const;
  [[nodiscard]] std::size_t failed_queries() const;
};

// "optimal" for eta = 0, "suboptimal" otherwise; a "#k" suffix keeps repeated etas apart.
std::string regime_name(double eta);

EvalReport benchmark(const QTable& q, std::span<const RegimeInput> regimes, const EvalConfig& cfg);

// Aggregation alone, exposed for the order-invariance property.
MethodSummary summarize(Method m, const std::string& regime, double eta, std::span<const QueryRecord> records);

struct DominanceCheck {
  bool ok = true;
  std::vector<std::string> violations;
};

// DWPI mean KL, MSE and utility loss no worse than every baseline in every regime.
DominanceCheck dwpi_dominates(const EvalReport& report, double tol = 1e-12);

nlohmann::json to_json(const EvalReport& r);
std::string metrics_csv(const EvalReport& r);
std::string timing_csv(const EvalReport& r);
// report.json, metrics.csv, timing.csv
void write_report(const std::filesystem::path& dir, const EvalReport& r);

}  // namespace dwpi

#endif  // DWPI_EVAL_HPP
