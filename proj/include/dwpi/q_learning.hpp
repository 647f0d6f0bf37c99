#ifndef DWPI_Q_LEARNING_HPP
#define DWPI_Q_LEARNING_HPP

#include <concepts>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dwpi/env.hpp"
#include "dwpi/preference.hpp"
#include "dwpi/rng.hpp"

namespace dwpi {

struct TrainConfig {
  std::size_t episodes = 200'000;
  double alpha = 0.1;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  // Initial action value; values above the best attainable return give optimistic exploration.
  double q_init = 0.0;
  // Unset: use the environment's own discount.
  std::optional<double> discount;
  std::uint64_t seed = 0;

  void validate() const;
  [[nodiscard]] double discount_for(double env_discount) const { return discount.value_or(env_discount); }
};

// Linear schedule from epsilon_start (first episode) to epsilon_end (last episode).
double epsilon_at(const TrainConfig& cfg, std::size_t episode);

// Any episodic MDP with dense state indices and vector rewards.
template <class D>
concept TabularDynamics = requires(const D& d, std::size_t s, int a, std::span<double> r) {
  { d.state_count() } -> std::convertible_to<std::size_t>;
  { d.actions() } -> std::convertible_to<int>;
  { d.objectives() } -> std::convertible_to<std::size_t>;
  { d.episode_cap() } -> std::convertible_to<int>;
  { d.start_index() } -> std::convertible_to<std::size_t>;
  { d.advance(s, a, r) } -> std::same_as<StepOutcome>;
};

namespace detail {

inline int greedy_action(std::span<const double> q) {
  int best = 0;
  for (int a = 1; a < static_cast<int>(q.size()); ++a) {
    if (q[static_cast<std::size_t>(a)] > q[static_cast<std::size_t>(best)]) best = a;
  }
  return best;
}

inline double max_value(std::span<const double> q) {
  double m = q[0];
  for (double v : q) m = v > m ? v : m;
  return m;
}

}  // namespace detail

// Epsilon-greedy Q-learning on scalarize(w, r), one shared table indexed by
// (state, preference, action) in row-major order. Each episode draws its
// preference uniformly from `prefs`. Bootstraps through cap truncation.
template <TabularDynamics D>
std::vector<double> q_learning(const D& env, std::span<const PreferenceVector> prefs,
                               const TrainConfig& cfg, double discount) {
  cfg.validate();
  const std::size_t P = prefs.size();
  const auto A = static_cast<std::size_t>(env.actions());
  const std::size_t m = env.objectives();
  std::vector<double> q(env.state_count() * P * A, cfg.q_init);
  std::vector<double> reward(m);
  Rng rng(cfg.seed);
  auto row = [&](std::size_t s, std::size_t p) { return std::span<double>(q.data() + (s * P + p) * A, A); };

  for (std::size_t ep = 0; ep < cfg.episodes; ++ep) {
    const double eps = epsilon_at(cfg, ep);
    const std::size_t p = P == 1 ? 0 : rng.below(P);
    const auto w = prefs[p].weights();
    std::size_t s = env.start_index();
    for (int t = 0; t < env.episode_cap(); ++t) {
      auto qs = row(s, p);
      const int a = rng.uniform() < eps ? static_cast<int>(rng.below(A)) : detail::greedy_action(qs);
      const StepOutcome o = env.advance(s, a, reward);
      double r = 0.0;
      for (std::size_t i = 0; i < m; ++i) r += w[i] * reward[i];
      const double target = o.terminal ? r : r + discount * detail::max_value(row(o.next, p));
      double& cell = qs[static_cast<std::size_t>(a)];
      cell += cfg.alpha * (target - cell);
      if (o.terminal) break;
      s = o.next;
    }
  }
  return q;
}

// Plays one greedy episode for preference index p; returns undiscounted per-objective returns.
template <TabularDynamics D>
RewardVector greedy_episode(const D& env, std::span<const double> q, std::size_t P, std::size_t p) {
  const auto A = static_cast<std::size_t>(env.actions());
  RewardVector total(env.objectives());
  std::vector<double> reward(env.objectives());
  std::size_t s = env.start_index();
  for (int t = 0; t < env.episode_cap(); ++t) {
    const int a = detail::greedy_action(q.subspan((s * P + p) * A, A));
    const StepOutcome o = env.advance(s, a, reward);
    for (std::size_t i = 0; i < reward.size(); ++i) total[i] += reward[i];
    if (o.terminal) break;
    s = o.next;
  }
  return total;
}

}  // namespace dwpi

#endif  // DWPI_Q_LEARNING_HPP
