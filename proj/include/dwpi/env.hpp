#ifndef DWPI_ENV_HPP
#define DWPI_ENV_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dwpi/preference.hpp"

namespace dwpi {

enum class EnvKind { DeepSeaTreasure, ItemGathering };

struct Cell {
  int row = 0;
  int col = 0;
  auto operator<=>(const Cell&) const = default;
};

struct Treasure {
  Cell cell;
  double value = 0.0;
};

struct Item {
  Cell cell;
  std::size_t color = 0;
};

// Plain description of a gridworld, mirrored one-to-one by the layout JSON file.
struct EnvLayout {
  std::string name;
  EnvKind kind = EnvKind::DeepSeaTreasure;
  int rows = 0;
  int cols = 0;
  Cell start;
  std::vector<Cell> walls;
  std::vector<Treasure> treasures;  // DeepSeaTreasure only
  std::vector<std::string> colors;  // ItemGathering only; one objective per color
  std::vector<Item> items;          // ItemGathering only
  int episode_cap = 0;
  double discount = 1.0;
};

// Actions: 0 up, 1 down, 2 left, 3 right.
inline constexpr int kActionCount = 4;

struct EnvState {
  Cell pos;
  std::uint32_t remaining = 0;  // bitmask of items still on the grid
  int steps = 0;
  bool operator==(const EnvState&) const = default;
};

struct Transition {
  EnvState next_state;
  RewardVector reward;
  bool terminal = false;
  bool truncated = false;  // terminal only because the episode cap was hit
};

// Result of advancing a dense state index; the episode cap is the caller's concern.
struct StepOutcome {
  std::size_t next = 0;
  bool terminal = false;
};

// A validated environment. Immutable; cheap lookups for the tabular learners.
class EnvSpec {
 public:
  explicit EnvSpec(EnvLayout layout);

  [[nodiscard]] const EnvLayout& layout() const noexcept { return layout_; }
  [[nodiscard]] const std::string& name() const noexcept { return layout_.name; }
  [[nodiscard]] EnvKind kind() const noexcept { return layout_.kind; }
  [[nodiscard]] std::size_t objectives() const noexcept { return objectives_; }
  [[nodiscard]] int actions() const noexcept { return kActionCount; }
  [[nodiscard]] int episode_cap() const noexcept { return layout_.episode_cap; }
  [[nodiscard]] double discount() const noexcept { return layout_.discount; }
  [[nodiscard]] std::size_t state_count() const noexcept { return state_count_; }
  [[nodiscard]] std::uint64_t hash() const noexcept { return hash_; }

  [[nodiscard]] std::size_t encode(const EnvState& s) const;
  [[nodiscard]] EnvState decode(std::size_t index, int steps = 0) const;
  [[nodiscard]] std::size_t start_index() const { return encode(initial_state()); }
  [[nodiscard]] EnvState initial_state() const;

  // Applies one action to a dense state. Writes the per-objective reward into
  // `reward` (size objectives()).
  StepOutcome advance(std::size_t state, int action, std::span<double> reward) const;

  [[nodiscard]] bool is_wall(Cell c) const;
  [[nodiscard]] bool in_bounds(Cell c) const {
    return c.row >= 0 && c.row < layout_.rows && c.col >= 0 && c.col < layout_.cols;
  }

 private:
  [[nodiscard]] std::size_t cell_index(Cell c) const {
    return static_cast<std::size_t>(c.row) * static_cast<std::size_t>(layout_.cols) +
           static_cast<std::size_t>(c.col);
  }
  void validate_and_index();

  EnvLayout layout_;
  std::size_t objectives_ = 0;
  std::size_t state_count_ = 0;
  std::uint64_t hash_ = 0;
  std::uint32_t full_mask_ = 0;
  std::vector<std::uint8_t> wall_;
  std::vector<int> treasure_at_;  // index into treasures, -1 if none
  std::vector<int> item_at_;      // index into items, -1 if none
};

EnvState reset(const EnvSpec& spec, std::uint64_t seed);
Transition step(const EnvSpec& spec, const EnvState& s, int action);

inline constexpr std::size_t kDefaultOracleNodeBudget = 50'000'000;

struct OracleEntry {
  std::string label;
  RewardVector returns;
};

// Every outcome a deterministic policy can end an episode with (undiscounted).
// DeepSeaTreasure: one entry per reachable treasure, (value, -shortest path).
// ItemGathering: every distinct per-color pickup count vector reachable within the cap.
std::vector<OracleEntry> attainable_returns(const EnvSpec& spec,
                                            std::size_t node_budget = kDefaultOracleNodeBudget);

// DeepSeaTreasure: the per-treasure entries. ItemGathering: the non-dominated subset.
std::vector<OracleEntry> oracle_returns(const EnvSpec& spec,
                                        std::size_t node_budget = kDefaultOracleNodeBudget);

std::vector<OracleEntry> non_dominated(std::vector<OracleEntry> entries);

// argmax of scalarize(w, .) over `entries`; ties go to the lexicographically smallest vector.
RewardVector best_of(std::span<const OracleEntry> entries, const PreferenceVector& w);
RewardVector oracle_best(const EnvSpec& spec, const PreferenceVector& w);

// max - min over attainable returns, per objective.
std::vector<double> return_ranges(const EnvSpec& spec);

EnvSpec layout_from_json(const nlohmann::json& j);
nlohmann::json layout_to_json(const EnvLayout& layout);
EnvSpec load_layout(const std::filesystem::path& path);

// Same grid with items scattered over free cells using `seed`.
EnvSpec with_random_items(const EnvSpec& spec, std::uint64_t seed);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);
std::uint64_t parse_hex64(const std::string& s);

}  // namespace dwpi

#endif  // DWPI_ENV_HPP
