#include "dwpi/env.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "dwpi/error.hpp"

namespace dwpi {

namespace {

constexpr std::array<int, kActionCount> kRowDelta{-1, 1, 0, 0};
constexpr std::array<int, kActionCount> kColDelta{0, 0, -1, 1};
constexpr std::size_t kMaxItems = 20;

std::string cell_str(Cell c) {
  return "(" + std::to_string(c.row) + "," + std::to_string(c.col) + ")";
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
    v >>= 4;
  }
  return out;
}

std::uint64_t parse_hex64(const std::string& s) {
  if (s.size() != 16) throw ConfigError("malformed 64-bit hash '" + s + "'");
  std::uint64_t v = 0;
  for (char c : s) {
    v <<= 4;
    if (c >= '0' && c <= '9') v |= static_cast<std::uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint64_t>(c - 'a' + 10);
    else throw ConfigError("malformed 64-bit hash '" + s + "'");
  }
  return v;
}

EnvSpec::EnvSpec(EnvLayout layout) : layout_(std::move(layout)) { validate_and_index(); }

void EnvSpec::validate_and_index() {
  const auto& L = layout_;
  const std::string who = "layout '" + L.name + "': ";
  if (L.rows < 1 || L.cols < 1) throw ConfigError(who + "grid must be at least 1x1");
  if (L.episode_cap < 1) throw ConfigError(who + "episode_cap must be >= 1");
  if (!(L.discount > 0.0 && L.discount <= 1.0)) throw ConfigError(who + "discount must lie in (0, 1]");
  if (!in_bounds(L.start)) throw ConfigError(who + "start cell out of bounds");

  const auto cells = static_cast<std::size_t>(L.rows) * static_cast<std::size_t>(L.cols);
  wall_.assign(cells, 0);
  treasure_at_.assign(cells, -1);
  item_at_.assign(cells, -1);
  for (const Cell& w : L.walls) {
    if (!in_bounds(w)) throw ConfigError(who + "wall " + cell_str(w) + " out of bounds");
    wall_[cell_index(w)] = 1;
  }
  if (wall_[cell_index(L.start)]) throw ConfigError(who + "start cell is a wall");

  if (L.kind == EnvKind::DeepSeaTreasure) {
    objectives_ = 2;
    if (L.treasures.empty()) throw ConfigError(who + "needs at least one treasure");
    for (std::size_t i = 0; i < L.treasures.size(); ++i) {
      const Treasure& t = L.treasures[i];
      if (!in_bounds(t.cell) || wall_[cell_index(t.cell)]) {
        throw ConfigError(who + "treasure " + cell_str(t.cell) + " is out of bounds or on a wall");
      }
      if (t.cell == L.start) throw ConfigError(who + "treasure on the start cell");
      if (!std::isfinite(t.value)) throw ConfigError(who + "treasure value must be finite");
      if (treasure_at_[cell_index(t.cell)] >= 0) throw ConfigError(who + "duplicate treasure cell");
      treasure_at_[cell_index(t.cell)] = static_cast<int>(i);
    }
    auto by_depth = L.treasures;
    std::sort(by_depth.begin(), by_depth.end(),
              [](const Treasure& a, const Treasure& b) { return a.cell < b.cell; });
    for (std::size_t i = 1; i < by_depth.size(); ++i) {
      if (!(by_depth[i].value > by_depth[i - 1].value)) {
        throw ConfigError(who + "treasure values must strictly increase with depth");
      }
    }
    state_count_ = cells;
  } else {
    if (L.colors.size() < 2) throw ConfigError(who + "item gathering needs at least 2 colors");
    objectives_ = L.colors.size();
    if (L.items.size() > kMaxItems) throw ConfigError(who + "at most 20 items are supported");
    std::vector<std::size_t> per_color(objectives_, 0);
    for (std::size_t i = 0; i < L.items.size(); ++i) {
      const Item& it = L.items[i];
      if (!in_bounds(it.cell) || wall_[cell_index(it.cell)]) {
        throw ConfigError(who + "item " + cell_str(it.cell) + " is out of bounds or on a wall");
      }
      if (it.cell == L.start) throw ConfigError(who + "item on the start cell");
      if (it.color >= objectives_) throw ConfigError(who + "item color index out of range");
      if (item_at_[cell_index(it.cell)] >= 0) throw ConfigError(who + "duplicate item cell");
      item_at_[cell_index(it.cell)] = static_cast<int>(i);
      ++per_color[it.color];
    }
    for (std::size_t c = 0; c < objectives_; ++c) {
      if (per_color[c] == 0) throw ConfigError(who + "color '" + L.colors[c] + "' has no items");
    }
    full_mask_ = L.items.size() == 32 ? ~0u : ((1u << L.items.size()) - 1u);
    state_count_ = cells << L.items.size();
  }

  // Reachability of every treasure / item from the start, ignoring the cap.
  std::vector<std::uint8_t> seen(cells, 0);
  std::deque<Cell> queue{L.start};
  seen[cell_index(L.start)] = 1;
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    if (L.kind == EnvKind::DeepSeaTreasure && treasure_at_[cell_index(c)] >= 0) continue;
    for (int a = 0; a < kActionCount; ++a) {
      const Cell n{c.row + kRowDelta[a], c.col + kColDelta[a]};
      if (!in_bounds(n) || wall_[cell_index(n)] || seen[cell_index(n)]) continue;
      seen[cell_index(n)] = 1;
      queue.push_back(n);
    }
  }
  for (const auto& t : L.treasures) {
    if (!seen[cell_index(t.cell)]) throw ConfigError(who + "treasure " + cell_str(t.cell) + " unreachable");
  }
  for (const auto& it : L.items) {
    if (!seen[cell_index(it.cell)]) throw ConfigError(who + "item " + cell_str(it.cell) + " unreachable");
  }

  hash_ = fnv1a64(layout_to_json(layout_).dump());
}

bool EnvSpec::is_wall(Cell c) const { return !in_bounds(c) || wall_[cell_index(c)] != 0; }

EnvState EnvSpec::initial_state() const {
  EnvState s;
  s.pos = layout_.start;
  s.remaining = layout_.kind == EnvKind::ItemGathering ? full_mask_ : 0u;
  s.steps = 0;
  return s;
}

std::size_t EnvSpec::encode(const EnvState& s) const {
  const std::size_t cell = cell_index(s.pos);
  if (layout_.kind == EnvKind::DeepSeaTreasure) return cell;
  return (cell << layout_.items.size()) | s.remaining;
}

EnvState EnvSpec::decode(std::size_t index, int steps) const {
  EnvState s;
  std::size_t cell = index;
  if (layout_.kind == EnvKind::ItemGathering) {
    s.remaining = static_cast<std::uint32_t>(index & full_mask_);
    cell = index >> layout_.items.size();
  }
  s.pos = Cell{static_cast<int>(cell / static_cast<std::size_t>(layout_.cols)),
               static_cast<int>(cell % static_cast<std::size_t>(layout_.cols))};
  s.steps = steps;
  return s;
}

StepOutcome EnvSpec::advance(std::size_t state, int action, std::span<double> reward) const {
  EnvState s = decode(state);
  const auto a = static_cast<std::size_t>(action);
  Cell next{s.pos.row + kRowDelta[a], s.pos.col + kColDelta[a]};
  if (!in_bounds(next) || wall_[cell_index(next)]) next = s.pos;
  std::fill(reward.begin(), reward.end(), 0.0);
  StepOutcome out;
  if (layout_.kind == EnvKind::DeepSeaTreasure) {
    reward[1] = -1.0;
    const int t = treasure_at_[cell_index(next)];
    if (t >= 0) {
      reward[0] = layout_.treasures[static_cast<std::size_t>(t)].value;
      out.terminal = true;
    }
    s.pos = next;
  } else {
    const int it = item_at_[cell_index(next)];
    if (it >= 0 && (s.remaining & (1u << it))) {
      s.remaining &= ~(1u << it);
      reward[layout_.items[static_cast<std::size_t>(it)].color] = 1.0;
    }
    s.pos = next;
    out.terminal = s.remaining == 0;
  }
  out.next = encode(s);
  return out;
}

EnvState reset(const EnvSpec& spec, std::uint64_t /*seed*/) {
  // Layouts are fixed; seed-dependent placement is applied to the spec via with_random_items.
  return spec.initial_state();
}

Transition step(const EnvSpec& spec, const EnvState& s, int action) {
  if (action < 0 || action >= spec.actions()) {
    throw ConfigError("invalid action index " + std::to_string(action));
  }
  if (s.steps >= spec.episode_cap()) throw ConfigError("step called on a finished episode");
  Transition t;
  t.reward = RewardVector(spec.objectives());
  std::vector<double> buf(spec.objectives());
  const StepOutcome o = spec.advance(spec.encode(s), action, buf);
  for (std::size_t i = 0; i < buf.size(); ++i) t.reward[i] = buf[i];
  t.next_state = spec.decode(o.next, s.steps + 1);
  t.terminal = o.terminal;
  if (!o.terminal && t.next_state.steps >= spec.episode_cap()) {
    t.terminal = true;
    t.truncated = true;
  }
  return t;
}

namespace {

std::vector<OracleEntry> treasure_entries(const EnvSpec& spec) {
  const auto& L = spec.layout();
  const auto cells = static_cast<std::size_t>(L.rows * L.cols);
  std::vector<int> dist(cells, -1);
  auto idx = [&](Cell c) { return static_cast<std::size_t>(c.row * L.cols + c.col); };
  std::deque<Cell> queue{L.start};
  dist[idx(L.start)] = 0;
  std::set<Cell> treasure_cells;
  for (const auto& t : L.treasures) treasure_cells.insert(t.cell);
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    if (treasure_cells.count(c)) continue;  // entering a treasure ends the episode
    for (int a = 0; a < kActionCount; ++a) {
      const Cell n{c.row + kRowDelta[static_cast<std::size_t>(a)], c.col + kColDelta[static_cast<std::size_t>(a)]};
      if (spec.is_wall(n) || dist[idx(n)] >= 0) continue;
      dist[idx(n)] = dist[idx(c)] + 1;
      queue.push_back(n);
    }
  }
  std::vector<OracleEntry> out;
  for (const auto& t : L.treasures) {
    const int d = dist[idx(t.cell)];
    if (d < 0 || d > L.episode_cap) continue;
    out.push_back({"treasure" + cell_str(t.cell), RewardVector{t.value, -static_cast<double>(d)}});
  }
  return out;
}

std::vector<OracleEntry> item_outcomes(const EnvSpec& spec, std::size_t node_budget) {
  const auto& L = spec.layout();
  const std::size_t states = spec.state_count();
  const auto depth = static_cast<std::size_t>(L.episode_cap);
  if (states * (depth + 1) > node_budget) {
    throw ConfigError("oracle search over " + std::to_string(states * (depth + 1)) +
                      " nodes exceeds the node budget of " + std::to_string(node_budget));
  }
  std::vector<std::uint8_t> frontier(states, 0), next(states, 0);
  std::vector<std::uint8_t> final_mask(std::size_t{1} << L.items.size(), 0);
  frontier[spec.start_index()] = 1;
  std::vector<double> reward(spec.objectives());
  const std::uint32_t mask_bits = (1u << L.items.size()) - 1u;
  for (std::size_t d = 0; d < depth; ++d) {
    std::fill(next.begin(), next.end(), 0);
    for (std::size_t s = 0; s < states; ++s) {
      if (!frontier[s]) continue;
      for (int a = 0; a < kActionCount; ++a) {
        const StepOutcome o = spec.advance(s, a, reward);
        if (o.terminal) final_mask[o.next & mask_bits] = 1;
        else next[o.next] = 1;
      }
    }
    std::swap(frontier, next);
  }
  for (std::size_t s = 0; s < states; ++s) {
    if (frontier[s]) final_mask[s & mask_bits] = 1;
  }
  std::map<std::vector<double>, std::uint32_t> distinct;
  for (std::uint32_t remaining = 0; remaining < final_mask.size(); ++remaining) {
    if (!final_mask[remaining]) continue;
    std::vector<double> counts(spec.objectives(), 0.0);
    for (std::size_t i = 0; i < L.items.size(); ++i) {
      if (!(remaining & (1u << i))) counts[L.items[i].color] += 1.0;
    }
    distinct.emplace(counts, remaining);
  }
  std::vector<OracleEntry> out;
  for (const auto& [counts, remaining] : distinct) {
    std::ostringstream label;
    label << "collect";
    for (std::size_t c = 0; c < counts.size(); ++c) label << ":" << L.colors[c] << "=" << counts[c];
    out.push_back({label.str(), RewardVector(counts)});
  }
  return out;
}

bool dominates(const RewardVector& a, const RewardVector& b) {
  bool strict = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return false;
    if (a[i] > b[i]) strict = true;
  }
  return strict;
}

}  // namespace

std::vector<OracleEntry> attainable_returns(const EnvSpec& spec, std::size_t node_budget) {
  if (spec.kind() == EnvKind::DeepSeaTreasure) {
    if (spec.state_count() > node_budget) throw ConfigError("oracle search exceeds the node budget");
    return treasure_entries(spec);
  }
  return item_outcomes(spec, node_budget);
}

std::vector<OracleEntry> non_dominated(std::vector<OracleEntry> entries) {
  std::vector<OracleEntry> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < entries.size() && !dominated; ++j) {
      dominated = j != i && dominates(entries[j].returns, entries[i].returns);
    }
    if (!dominated) out.push_back(entries[i]);
  }
  return out;
}

std::vector<OracleEntry> oracle_returns(const EnvSpec& spec, std::size_t node_budget) {
  auto all = attainable_returns(spec, node_budget);
  if (spec.kind() == EnvKind::DeepSeaTreasure) return all;
  return non_dominated(std::move(all));
}

RewardVector best_of(std::span<const OracleEntry> entries, const PreferenceVector& w) {
  if (entries.empty()) throw ConfigError("oracle has no attainable returns");
  const RewardVector* best = &entries[0].returns;
  double best_u = scalarize(w, *best);
  for (std::size_t i = 1; i < entries.size(); ++i) {
    const double u = scalarize(w, entries[i].returns);
    if (u > best_u || (u == best_u && entries[i].returns < *best)) {
      best_u = u;
      best = &entries[i].returns;
    }
  }
  return *best;
}

RewardVector oracle_best(const EnvSpec& spec, const PreferenceVector& w) {
  const auto entries = oracle_returns(spec);
  return best_of(entries, w);
}

std::vector<double> return_ranges(const EnvSpec& spec) {
  const auto entries = attainable_returns(spec);
  if (entries.empty()) throw ConfigError("no attainable returns");
  const std::size_t m = spec.objectives();
  std::vector<double> lo(m, INFINITY), hi(m, -INFINITY);
  for (const auto& e : entries) {
    for (std::size_t i = 0; i < m; ++i) {
      lo[i] = std::min(lo[i], e.returns[i]);
      hi[i] = std::max(hi[i], e.returns[i]);
    }
  }
  std::vector<double> range(m);
  for (std::size_t i = 0; i < m; ++i) range[i] = hi[i] - lo[i];
  return range;
}

namespace {

Cell cell_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("cells are [row, col] arrays");
  return Cell{j[0].get<int>(), j[1].get<int>()};
}

nlohmann::json cell_to_json(Cell c) { return nlohmann::json::array({c.row, c.col}); }

}  // namespace

nlohmann::json layout_to_json(const EnvLayout& L) {
  nlohmann::json j;
  j["name"] = L.name;
  j["kind"] = L.kind == EnvKind::DeepSeaTreasure ? "deep_sea_treasure" : "item_gathering";
  j["rows"] = L.rows;
  j["cols"] = L.cols;
  j["start"] = cell_to_json(L.start);
  j["walls"] = nlohmann::json::array();
  for (const auto& w : L.walls) j["walls"].push_back(cell_to_json(w));
  j["episode_cap"] = L.episode_cap;
  j["discount"] = L.discount;
  if (L.kind == EnvKind::DeepSeaTreasure) {
    j["treasures"] = nlohmann::json::array();
    for (const auto& t : L.treasures) j["treasures"].push_back({{"cell", cell_to_json(t.cell)}, {"value", t.value}});
  } else {
    j["colors"] = L.colors;
    j["items"] = nlohmann::json::array();
    for (const auto& it : L.items) {
      j["items"].push_back({{"cell", cell_to_json(it.cell)}, {"color", L.colors.at(it.color)}});
    }
  }
  return j;
}

EnvSpec layout_from_json(const nlohmann::json& j) {
  try {
    EnvLayout L;
    L.name = j.at("name").get<std::string>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "deep_sea_treasure") L.kind = EnvKind::DeepSeaTreasure;
    else if (kind == "item_gathering") L.kind = EnvKind::ItemGathering;
    else throw ConfigError("unknown environment kind '" + kind + "'");
    L.rows = j.at("rows").get<int>();
    L.cols = j.at("cols").get<int>();
    L.start = cell_from_json(j.at("start"));
    for (const auto& w : j.value("walls", nlohmann::json::array())) L.walls.push_back(cell_from_json(w));
    L.episode_cap = j.at("episode_cap").get<int>();
    L.discount = j.at("discount").get<double>();
    if (L.kind == EnvKind::DeepSeaTreasure) {
      for (const auto& t : j.at("treasures")) {
        L.treasures.push_back({cell_from_json(t.at("cell")), t.at("value").get<double>()});
      }
    } else {
      L.colors = j.at("colors").get<std::vector<std::string>>();
      for (const auto& it : j.at("items")) {
        const auto color = it.at("color").get<std::string>();
        const auto pos = std::find(L.colors.begin(), L.colors.end(), color);
        if (pos == L.colors.end()) throw ConfigError("item color '" + color + "' is not declared");
        L.items.push_back({cell_from_json(it.at("cell")), static_cast<std::size_t>(pos - L.colors.begin())});
      }
    }
    return EnvSpec(std::move(L));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed layout: ") + e.what());
  }
}

EnvSpec load_layout(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open layout file '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("layout file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return layout_from_json(j);
}

EnvSpec with_random_items(const EnvSpec& spec, std::uint64_t seed) {
  EnvLayout L = spec.layout();
  if (L.kind != EnvKind::ItemGathering) return spec;
  std::vector<Cell> free;
  for (int r = 0; r < L.rows; ++r) {
    for (int c = 0; c < L.cols; ++c) {
      const Cell cell{r, c};
      if (!spec.is_wall(cell) && cell != L.start) free.push_back(cell);
    }
  }
  Rng rng(seed);
  shuffle(free, rng);
  for (std::size_t i = 0; i < L.items.size(); ++i) L.items[i].cell = free[i];
  return EnvSpec(std::move(L));
}

}  // namespace dwpi
