#ifndef DWPI_CONFIG_HPP
#define DWPI_CONFIG_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "dwpi/baselines.hpp"
#include "dwpi/env.hpp"
#include "dwpi/mlp.hpp"
#include "dwpi/q_learning.hpp"

namespace dwpi {

struct DemoGenConfig {
  std::size_t n = 5000;
  double noise_eta = 0.0;
  std::size_t episodes_per_demo = 1;
  std::array<double, 3> split{0.8, 0.1, 0.1};
};

struct ModelConfig {
  std::vector<std::size_t> hidden{64, 64};
  FitConfig fit;
};

struct RunConfig {
  std::string env_name;
  std::filesystem::path layout_path;  // resolved
  double grid_step = 0.1;
  TrainConfig agent;
  DemoGenConfig demos;
  ModelConfig model;
  BaselineConfig baseline;  // return bounds filled from the layout unless given
  double bound_margin = 0.1;
  std::size_t eval_max_queries = 0;
  std::filesystem::path output_dir = "runs";
  std::size_t workers = 1;
  std::uint64_t seed = 0;
};

// Relative layout paths resolve against `base_dir` first, then the working
// directory, then the bundled data directory.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const RunConfig& c);

nlohmann::json read_json_file(const std::filesystem::path& path);

// Sets a dotted key ("demos.n") to a value parsed as JSON, or as a string when
// it does not parse.
void apply_override(nlohmann::json& j, const std::string& assignment);

EnvSpec load_env(const RunConfig& c);
PreferenceSpace make_space(const RunConfig& c, const EnvSpec& spec);
BaselineConfig baseline_config(const RunConfig& c, const EnvSpec& spec);

// Per-stage seeds, all derived from the master seed.
enum class Stage : std::uint64_t { Agent = 1, Demos = 2, Split = 3, ModelInit = 4, Fit = 5, Baselines = 6, Eval = 7 };
std::uint64_t stage_seed(const RunConfig& c, Stage s);

// Hash chain: every artifact records the hash of the configuration that produced it.
std::uint64_t agent_config_hash(const RunConfig& c, const EnvSpec& spec);
std::uint64_t demos_config_hash(const RunConfig& c, std::uint64_t agent_hash);
std::uint64_t model_config_hash(const RunConfig& c, std::uint64_t demos_hash);
std::uint64_t run_config_hash(const RunConfig& c);

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

}  // namespace dwpi

#endif  // DWPI_CONFIG_HPP
