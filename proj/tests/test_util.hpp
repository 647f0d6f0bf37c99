#ifndef DWPI_TEST_UTIL_HPP
#define DWPI_TEST_UTIL_HPP

#include <filesystem>
#include <string>

#include "dwpi/agent.hpp"
#include "dwpi/env.hpp"

namespace dwpi::testing {

inline std::filesystem::path data_path(const std::string& rel) { return std::filesystem::path(DWPI_DATA_DIR) / rel; }

inline EnvSpec default_cdst() { return load_layout(data_path("layouts/cdst_default.json")); }
inline EnvSpec default_item_gathering() { return load_layout(data_path("layouts/item_gathering_default.json")); }

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("dwpi_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// A 2x2 open grid with one item of each of three colors; start at (0,0).
inline EnvSpec tiny_item_gathering(int cap = 6) {
  EnvLayout l;
  l.name = "tiny_ig";
  l.kind = EnvKind::ItemGathering;
  l.rows = 2;
  l.cols = 2;
  l.start = {0, 0};
  l.colors = {"green", "red", "yellow"};
  l.items = {{{0, 1}, 0}, {{1, 0}, 1}, {{1, 1}, 2}};
  l.episode_cap = cap;
  l.discount = 0.95;
  return EnvSpec(l);
}

// One treasure right below the start in an otherwise open column.
inline EnvSpec one_treasure_cdst() {
  EnvLayout l;
  l.name = "one_treasure";
  l.kind = EnvKind::DeepSeaTreasure;
  l.rows = 2;
  l.cols = 1;
  l.start = {0, 0};
  l.treasures = {{{1, 0}, 5.0}};
  l.episode_cap = 10;
  l.discount = 0.99;
  return EnvSpec(l);
}

inline TrainConfig cdst_train_config(std::uint64_t seed = 1) {
  TrainConfig c;
  c.episodes = 200'000;
  c.q_init = 30.0;
  c.seed = seed;
  return c;
}

// Shared trained default-CDST agent; training takes a fraction of a second.
inline const QTable& trained_cdst() {
  static const QTable q = train_agent(default_cdst(), PreferenceSpace(2, 0.1), cdst_train_config());
  return q;
}

}  // namespace dwpi::testing

#endif  // DWPI_TEST_UTIL_HPP
