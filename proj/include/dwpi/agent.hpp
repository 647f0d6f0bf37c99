#ifndef DWPI_AGENT_HPP
#define DWPI_AGENT_HPP

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dwpi/env.hpp"
#include "dwpi/preference.hpp"
#include "dwpi/q_learning.hpp"

namespace dwpi {

// The preference-conditioned agent: one Q-table over (state, lattice preference, action).
class QTable {
 public:
  QTable(EnvSpec spec, PreferenceSpace space, double discount, std::vector<double> values);

  [[nodiscard]] const EnvSpec& spec() const noexcept { return spec_; }
  [[nodiscard]] const PreferenceSpace& space() const noexcept { return space_; }
  [[nodiscard]] double discount() const noexcept { return discount_; }
  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }

  [[nodiscard]] double value(std::size_t state, std::size_t pref, int action) const;
  [[nodiscard]] std::size_t pref_count() const noexcept { return space_.size(); }

  bool operator==(const QTable& other) const {
    return spec_.hash() == other.spec_.hash() && space_ == other.space_ &&
           discount_ == other.discount_ && values_ == other.values_;
  }

 private:
  EnvSpec spec_;
  PreferenceSpace space_;
  double discount_;
  std::vector<double> values_;
};

QTable train_agent(const EnvSpec& spec, const PreferenceSpace& space, const TrainConfig& cfg);

// Index of the lattice point matching `w`. Throws when `w` is farther than
// grid_step / 2 (Euclidean) from every lattice point.
std::size_t lattice_index_checked(const PreferenceSpace& space, const PreferenceVector& w);

// One greedy episode conditioned on `w`; ties between actions go to the lowest index.
ReturnSummary greedy_rollout(const QTable& q, const PreferenceVector& w, std::uint64_t seed = 0);

// Fraction of lattice points whose greedy scalarized return is within `tol` of the oracle optimum.
double oracle_match_fraction(const QTable& q, double tol = 1e-6);

void save_qtable(const std::filesystem::path& path, const QTable& q, std::uint64_t config_hash);

struct LoadedQTable {
  QTable table;
  std::uint64_t config_hash;
};

// Fails unless the stored spec hash matches `spec`.
LoadedQTable load_qtable(const std::filesystem::path& path, const EnvSpec& spec);

}  // namespace dwpi

#endif  // DWPI_AGENT_HPP
