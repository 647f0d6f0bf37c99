#ifndef DWPI_PIPELINE_HPP
#define DWPI_PIPELINE_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "dwpi/agent.hpp"
#include "dwpi/config.hpp"
#include "dwpi/demos.hpp"
#include "dwpi/eval.hpp"
#include "dwpi/mlp.hpp"

// The pipeline stages behind the CLI subcommands. Each writes its artifacts
// into cfg.output_dir and returns what it produced.
namespace dwpi {

struct AgentStage {
  QTable table;
  std::uint64_t config_hash;
  double oracle_match;
  double seconds;
  std::filesystem::path path;
};

struct DemoStage {
  DemoSet demos;
  std::filesystem::path path;
};

struct ModelStage {
  FitResult fit;
  double seconds;
  std::filesystem::path path;
};

// Writes config.json (the effective configuration) into the output directory.
std::filesystem::path prepare_output(const RunConfig& cfg);

AgentStage stage_train_agent(const RunConfig& cfg, const EnvSpec& spec);
DemoStage stage_gen_demos(const RunConfig& cfg, const QTable& q);
ModelStage stage_train_dwpi(const RunConfig& cfg, const DemoSet& ds, const std::string& name);
EvalReport stage_eval(const RunConfig& cfg, const QTable& q, std::span<const RegimeInput> regimes);

// Loaders that enforce the hash chain; a mismatch is a ConfigError.
QTable load_agent_checked(const std::filesystem::path& path, const RunConfig& cfg, const EnvSpec& spec);
DemoSet load_demos_checked(const std::filesystem::path& path, const EnvSpec& spec, std::uint64_t agent_hash);
LoadedModel load_model_checked(const std::filesystem::path& path, const EnvSpec& spec, const DemoSet& ds);

}  // namespace dwpi

#endif  // DWPI_PIPELINE_HPP
