#include <gtest/gtest.h>

#include <deque>
#include <set>

#include "dwpi/env.hpp"
#include "dwpi/error.hpp"
#include "test_util.hpp"

using namespace dwpi;
using dwpi::testing::default_cdst;
using dwpi::testing::default_item_gathering;

namespace {

// Breadth-first distance over open cells, treasures being absorbing.
std::vector<RewardVector> bfs_treasure_returns(const EnvLayout& l) {
  std::set<Cell> walls(l.walls.begin(), l.walls.end());
  std::map<Cell, double> treasure;
  for (const auto& t : l.treasures) treasure[t.cell] = t.value;
  std::map<Cell, int> dist{{l.start, 0}};
  std::deque<Cell> open{l.start};
  std::vector<RewardVector> out(l.treasures.size());
  const int dr[] = {-1, 1, 0, 0}, dc[] = {0, 0, -1, 1};
  while (!open.empty()) {
    const Cell c = open.front();
    open.pop_front();
    if (treasure.contains(c) && !(c == l.start)) continue;
    for (int a = 0; a < 4; ++a) {
      const Cell n{c.row + dr[a], c.col + dc[a]};
      if (n.row < 0 || n.row >= l.rows || n.col < 0 || n.col >= l.cols || walls.contains(n) || dist.contains(n)) continue;
      dist[n] = dist[c] + 1;
      open.push_back(n);
    }
  }
  for (std::size_t i = 0; i < l.treasures.size(); ++i) {
    out[i] = RewardVector{l.treasures[i].value, -static_cast<double>(dist.at(l.treasures[i].cell))};
  }
  return out;
}

RewardVector brute_best(const std::vector<RewardVector>& cands, const PreferenceVector& w) {
  RewardVector best = cands.front();
  for (const auto& c : cands) {
    const double a = scalarize(w, c), b = scalarize(w, best);
    if (a > b || (a == b && c < best)) best = c;
  }
  return best;
}

}  // namespace

TEST(Env, ResetDefaults) {
  const auto cdst = default_cdst();
  const auto s = reset(cdst, 123);
  EXPECT_EQ(s.pos, (Cell{0, 0}));
  EXPECT_EQ(s.steps, 0);
  EXPECT_EQ(reset(cdst, 5), reset(cdst, 5));
  const auto ig = default_item_gathering();
  EXPECT_EQ(reset(ig, 0).remaining, (1u << 8) - 1);
  EXPECT_EQ(ig.objectives(), 3u);
  EXPECT_EQ(cdst.objectives(), 2u);
}

TEST(Env, CdstStepRules) {
  const auto spec = default_cdst();
  auto s = reset(spec, 0);
  // Right along the surface: no treasure.
  auto t = step(spec, s, 3);
  EXPECT_EQ(t.reward, (RewardVector{0.0, -1.0}));
  EXPECT_FALSE(t.terminal);
  EXPECT_EQ(t.next_state.pos, (Cell{0, 1}));
  // Up at the top row is blocked.
  t = step(spec, s, 0);
  EXPECT_EQ(t.next_state.pos, s.pos);
  EXPECT_EQ(t.reward, (RewardVector{0.0, -1.0}));
  EXPECT_EQ(t.next_state.steps, 1);
  // Down from the start lands on the first treasure.
  t = step(spec, s, 1);
  EXPECT_TRUE(t.terminal);
  EXPECT_FALSE(t.truncated);
  EXPECT_EQ(t.reward, (RewardVector{1.3, -1.0}));
  EXPECT_THROW(step(spec, s, 4), ConfigError);
  EXPECT_THROW(step(spec, s, -1), ConfigError);
}

TEST(Env, CdstWallBlocksMove) {
  const auto spec = default_cdst();
  // (5,5) is rock, (5,6) open water.
  const EnvState s{{5, 6}, 0, 3};
  const auto t = step(spec, s, 2);
  EXPECT_EQ(t.next_state.pos, (Cell{5, 6}));
  EXPECT_EQ(t.next_state.steps, 4);
  EXPECT_EQ(t.reward, (RewardVector{0.0, -1.0}));
}

TEST(Env, EpisodeCapTruncates) {
  const auto spec = default_cdst();
  EnvState s = reset(spec, 0);
  int n = 0;
  while (true) {
    const auto t = step(spec, s, 0);  // bump the ceiling forever
    ++n;
    if (t.terminal) {
      EXPECT_TRUE(t.truncated);
      break;
    }
    s = t.next_state;
  }
  EXPECT_EQ(n, spec.episode_cap());
}

TEST(Env, ItemPickup) {
  const auto spec = default_item_gathering();
  // Green item at (1,2): walk right twice then down.
  EnvState s = reset(spec, 0);
  s = step(spec, s, 3).next_state;
  s = step(spec, s, 3).next_state;
  const auto before = s.remaining;
  const auto t = step(spec, s, 1);
  EXPECT_EQ(t.reward, (RewardVector{1.0, 0.0, 0.0}));
  EXPECT_NE(t.next_state.remaining, before);
  EXPECT_EQ(__builtin_popcount(t.next_state.remaining), 7);
  // Clamped at the border.
  const auto u = step(spec, reset(spec, 0), 2);
  EXPECT_EQ(u.next_state.pos, (Cell{0, 0}));
}

TEST(Env, ItemConservation) {
  const auto spec = default_item_gathering();
  Rng rng(4);
  for (int ep = 0; ep < 200; ++ep) {
    EnvState s = reset(spec, 0);
    RewardVector total(3);
    int len = 0;
    while (true) {
      const auto t = step(spec, s, static_cast<int>(rng.below(4)));
      total += t.reward;
      ++len;
      s = t.next_state;
      if (t.terminal) break;
    }
    EXPECT_LE(len, spec.episode_cap());
    for (std::size_t c = 0; c < 3; ++c) {
      int at_reset = 0, left = 0;
      for (std::size_t i = 0; i < spec.layout().items.size(); ++i) {
        if (spec.layout().items[i].color != c) continue;
        ++at_reset;
        if (s.remaining & (1u << i)) ++left;
      }
      EXPECT_DOUBLE_EQ(total[c], at_reset - left);
    }
  }
}

TEST(Env, DeterministicTransitions) {
  const auto spec = default_item_gathering();
  Rng a(9), b(9);
  EnvState s1 = reset(spec, 1), s2 = reset(spec, 1);
  for (int i = 0; i < 30; ++i) {
    const auto t1 = step(spec, s1, static_cast<int>(a.below(4)));
    const auto t2 = step(spec, s2, static_cast<int>(b.below(4)));
    EXPECT_EQ(t1.next_state, t2.next_state);
    EXPECT_EQ(t1.reward, t2.reward);
    if (t1.terminal) break;
    s1 = t1.next_state;
    s2 = t2.next_state;
  }
}

TEST(Env, EncodeDecodeRoundTrip) {
  const auto spec = default_item_gathering();
  for (std::size_t i = 0; i < spec.state_count(); i += 37) {
    const auto s = spec.decode(i);
    EXPECT_EQ(spec.encode(s), i);
  }
}

TEST(Oracle, CdstMatchesBreadthFirstSearch) {
  const auto spec = default_cdst();
  const auto expect = bfs_treasure_returns(spec.layout());
  const auto got = oracle_returns(spec);
  ASSERT_EQ(got.size(), expect.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i].returns, expect[i]) << i;
}

TEST(Oracle, CdstBestExamples) {
  const auto spec = default_cdst();
  const auto cands = bfs_treasure_returns(spec.layout());
  EXPECT_EQ(oracle_best(spec, PreferenceVector{1.0, 0.0}), (RewardVector{26.9, -19.0}));
  EXPECT_EQ(oracle_best(spec, PreferenceVector{0.0, 1.0}), (RewardVector{1.3, -1.0}));
  EXPECT_EQ(oracle_best(spec, PreferenceVector{0.5, 0.5}), brute_best(cands, PreferenceVector{0.5, 0.5}));
  const PreferenceVector w{0.7, 0.3};
  EXPECT_DOUBLE_EQ(scalarize(w, oracle_best(spec, w)), scalarize(w, brute_best(cands, w)));
}

TEST(Oracle, CdstConvexFront) {
  const auto spec = default_cdst();
  const auto cands = bfs_treasure_returns(spec.layout());
  std::set<std::vector<double>> hit;
  const PreferenceSpace fine(2, 0.01);
  for (const auto& w : fine.points()) hit.insert(oracle_best(spec, w).data());
  for (const auto& c : cands) EXPECT_TRUE(hit.contains(c.data())) << c[0];
}

TEST(Oracle, OneTreasureDegenerate) {
  const auto spec = dwpi::testing::one_treasure_cdst();
  const auto r = oracle_returns(spec);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].returns, (RewardVector{5.0, -1.0}));
}

TEST(Oracle, TinyItemGatheringMatchesExhaustiveEnumeration) {
  const auto spec = dwpi::testing::tiny_item_gathering(6);
  // Every action sequence of length <= 6, following step() until termination.
  std::set<std::vector<double>> outcomes;
  for (int code = 0; code < 4096; ++code) {
    EnvState s = reset(spec, 0);
    RewardVector total(3);
    int c = code;
    for (int t = 0; t < 6; ++t) {
      const auto tr = step(spec, s, c % 4);
      c /= 4;
      total += tr.reward;
      s = tr.next_state;
      if (tr.terminal) break;
    }
    outcomes.insert(total.data());
  }
  std::vector<std::vector<double>> front;
  for (const auto& a : outcomes) {
    bool dominated = false;
    for (const auto& b : outcomes) {
      bool ge = true, gt = false;
      for (std::size_t i = 0; i < 3; ++i) {
        ge = ge && b[i] >= a[i];
        gt = gt || b[i] > a[i];
      }
      if (ge && gt) dominated = true;
    }
    if (!dominated) front.push_back(a);
  }
  std::set<std::vector<double>> got;
  for (const auto& e : oracle_returns(spec)) got.insert(e.returns.data());
  EXPECT_EQ(got, std::set<std::vector<double>>(front.begin(), front.end()));

  // A cap too short to collect everything leaves a real trade-off.
  const auto short_spec = dwpi::testing::tiny_item_gathering(2);
  std::set<std::vector<double>> short_got;
  for (const auto& e : oracle_returns(short_spec)) short_got.insert(e.returns.data());
  EXPECT_TRUE(short_got.contains({1.0, 0.0, 1.0}));
  EXPECT_TRUE(short_got.contains({0.0, 1.0, 1.0}));
  EXPECT_FALSE(short_got.contains({1.0, 1.0, 0.0}));
}

TEST(Oracle, NodeBudgetEnforced) {
  EXPECT_THROW(oracle_returns(default_item_gathering(), 10), Error);
}

TEST(Layout, ValidationErrors) {
  EnvLayout l = default_cdst().layout();
  std::swap(l.treasures[0].value, l.treasures[1].value);
  EXPECT_THROW(EnvSpec{l}, ConfigError);

  EnvLayout ig = default_item_gathering().layout();
  ig.items.erase(std::remove_if(ig.items.begin(), ig.items.end(), [](const Item& i) { return i.color == 2; }),
                 ig.items.end());
  EXPECT_THROW(EnvSpec{ig}, ConfigError);
}

TEST(Layout, JsonRoundTripAndHash) {
  const auto spec = default_cdst();
  const auto again = layout_from_json(layout_to_json(spec.layout()));
  EXPECT_EQ(again.hash(), spec.hash());
  EXPECT_NE(default_item_gathering().hash(), spec.hash());
}

TEST(Layout, MissingFileNamesPath) {
  try {
    load_layout("/nonexistent/layout.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/layout.json"), std::string::npos);
  }
}

TEST(Layout, RandomizedItemsAreSeeded) {
  const auto spec = default_item_gathering();
  const auto a = with_random_items(spec, 3), b = with_random_items(spec, 3), c = with_random_items(spec, 4);
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), c.hash());
  EXPECT_EQ(a.layout().items.size(), spec.layout().items.size());
}

TEST(Layout, ReturnRanges) {
  const auto r = return_ranges(default_cdst());
  EXPECT_DOUBLE_EQ(r[0], 26.9 - 1.3);
  EXPECT_DOUBLE_EQ(r[1], 18.0);
  EXPECT_EQ(return_ranges(default_item_gathering()), (std::vector<double>{3.0, 3.0, 2.0}));
}
