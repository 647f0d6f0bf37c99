#ifndef DWPI_DEMOS_HPP
#define DWPI_DEMOS_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "dwpi/agent.hpp"
#include "dwpi/preference.hpp"

namespace dwpi {

enum class Split { Train, Validation, Test };

std::string_view split_name(Split s);
Split split_from_name(std::string_view name);

// One (noisy reward trajectory, true preference) pair.
struct Demonstration {
  ReturnSummary features;
  PreferenceVector target;
  double noise_eta = 0.0;
  std::uint64_t seed = 0;
  Split split = Split::Train;

  bool operator==(const Demonstration&) const = default;
};

struct DemoSet {
  explicit DemoSet(PreferenceSpace s) : space(std::move(s)) {}

  PreferenceSpace space;
  std::uint64_t spec_hash = 0;
  std::uint64_t agent_hash = 0;   // config hash of the agent that played the episodes
  std::uint64_t config_hash = 0;  // hash of the generating configuration
  std::vector<Demonstration> demos;

  [[nodiscard]] std::size_t objectives() const { return space.objectives(); }
  [[nodiscard]] std::vector<Demonstration> subset(Split s) const;
  [[nodiscard]] std::size_t count(Split s) const;

  bool operator==(const DemoSet&) const = default;
};

struct DemoOptions {
  // Rollouts averaged per demonstration; 1 reproduces one-episode-per-sample.
  std::size_t episodes_per_demo = 1;
  std::size_t workers = 1;
};

// Demo i uses its own stream derive_seed(seed, demo stream, i), so the result
// does not depend on the worker count.
DemoSet generate_demos(const QTable& q, const PreferenceSpace& space, const NoiseSpec& noise, std::size_t n,
                       std::uint64_t seed, const DemoOptions& opts = {});

struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> stddev;  // population standard deviation, floored at kStdFloor
  static constexpr double kStdFloor = 1e-8;
};

// Computed on the train split only.
FeatureStats feature_stats(const DemoSet& ds);

// Random partition, stratified by target lattice point. Split sizes follow
// round(f * n) globally; every split with a positive fraction gets at least one
// demo of each lattice point that has enough demos.
DemoSet split(DemoSet ds, const std::array<double, 3>& fractions, std::uint64_t seed);

void save_demos(const std::filesystem::path& path, const DemoSet& ds);
DemoSet load_demos(const std::filesystem::path& path);

std::string demos_to_jsonl(const DemoSet& ds);
// Content hash of the canonical JSONL serialization.
std::uint64_t demos_hash(const DemoSet& ds);
DemoSet demos_from_jsonl(std::istream& in, const std::string& source = "<stream>");

}  // namespace dwpi

#endif  // DWPI_DEMOS_HPP
