#include "dwpi/agent.hpp"

#include <cmath>

#include "dwpi/binary_io.hpp"
#include "dwpi/error.hpp"

namespace dwpi {

namespace {
constexpr std::string_view kQTableMagic = "DWPIQTAB";
constexpr std::uint32_t kQTableVersion = 1;
}  // namespace

void TrainConfig::validate() const {
  if (episodes < 1) throw ConfigError("train: episodes must be >= 1");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("train: alpha must lie in (0, 1]");
  if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0) || !(epsilon_end >= 0.0 && epsilon_end <= 1.0)) {
    throw ConfigError("train: epsilons must lie in [0, 1]");
  }
  if (!std::isfinite(q_init)) throw ConfigError("train: q_init must be finite");
  if (discount && !(*discount > 0.0 && *discount <= 1.0)) {
    throw ConfigError("train: discount must lie in (0, 1]");
  }
}

double epsilon_at(const TrainConfig& cfg, std::size_t episode) {
  if (cfg.episodes <= 1) return cfg.epsilon_end;
  const double frac = static_cast<double>(std::min(episode, cfg.episodes - 1)) /
                      static_cast<double>(cfg.episodes - 1);
  return cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac;
}

QTable::QTable(EnvSpec spec, PreferenceSpace space, double discount, std::vector<double> values)
    : spec_(std::move(spec)), space_(std::move(space)), discount_(discount), values_(std::move(values)) {
  if (space_.objectives() != spec_.objectives()) {
    throw ConfigError("preference space has " + std::to_string(space_.objectives()) +
                      " objectives but environment has " + std::to_string(spec_.objectives()));
  }
  const std::size_t expected = spec_.state_count() * space_.size() * static_cast<std::size_t>(spec_.actions());
  if (values_.size() != expected) throw ConfigError("Q-table size does not match its environment and lattice");
  for (double v : values_) {
    if (!std::isfinite(v)) throw Error("Q-table contains a non-finite value");
  }
}

double QTable::value(std::size_t state, std::size_t pref, int action) const {
  const auto A = static_cast<std::size_t>(spec_.actions());
  if (state >= spec_.state_count() || pref >= space_.size() || action < 0 || action >= spec_.actions()) {
    throw ConfigError("Q-table index out of range");
  }
  return values_[(state * space_.size() + pref) * A + static_cast<std::size_t>(action)];
}

QTable train_agent(const EnvSpec& spec, const PreferenceSpace& space, const TrainConfig& cfg) {
  if (space.objectives() != spec.objectives()) throw ConfigError("lattice dimension differs from environment");
  const double gamma = cfg.discount_for(spec.discount());
  auto values = q_learning(spec, std::span<const PreferenceVector>(space.points()), cfg, gamma);
  return QTable(spec, space, gamma, std::move(values));
}

std::size_t lattice_index_checked(const PreferenceSpace& space, const PreferenceVector& w) {
  const std::size_t idx = space.nearest_index(w.weights());
  const double d = std::sqrt(squared_distance(space[idx].weights(), w.weights()));
  if (d > space.grid_step() / 2 + 1e-9) {
    throw ConfigError("preference is " + std::to_string(d) + " from the nearest lattice point (limit " +
                      std::to_string(space.grid_step() / 2) + "); snap it explicitly first");
  }
  return idx;
}

ReturnSummary greedy_rollout(const QTable& q, const PreferenceVector& w, std::uint64_t /*seed*/) {
  const std::size_t p = lattice_index_checked(q.space(), w);
  return greedy_episode(q.spec(), q.values(), q.pref_count(), p);
}

double oracle_match_fraction(const QTable& q, double tol) {
  const auto entries = oracle_returns(q.spec());
  std::size_t hits = 0;
  for (const auto& w : q.space().points()) {
    const double best = scalarize(w, best_of(entries, w));
    const double got = scalarize(w, greedy_rollout(q, w));
    if (std::abs(best - got) <= tol) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(q.space().size());
}

void save_qtable(const std::filesystem::path& path, const QTable& q, std::uint64_t config_hash) {
  BinaryWriter out(path);
  out.magic(kQTableMagic);
  out.u32(kQTableVersion);
  out.u64(q.spec().hash());
  out.u64(config_hash);
  out.u32(static_cast<std::uint32_t>(q.space().objectives()));
  out.f64(q.space().grid_step());
  out.u32(static_cast<std::uint32_t>(q.space().divisions()));
  out.u64(q.spec().state_count());
  out.u32(static_cast<std::uint32_t>(q.spec().actions()));
  out.u64(q.space().size());
  out.f64(q.discount());
  out.f64s(q.values());
  out.close();
}

LoadedQTable load_qtable(const std::filesystem::path& path, const EnvSpec& spec) {
  BinaryReader in(path);
  in.expect_magic(kQTableMagic);
  if (const auto v = in.u32(); v != kQTableVersion) {
    throw IoError("'" + path.string() + "': unsupported Q-table version " + std::to_string(v));
  }
  const auto spec_hash = in.u64();
  if (spec_hash != spec.hash()) {
    throw IoError("'" + path.string() + "' was trained on layout " + hex64(spec_hash) + ", expected " +
                  hex64(spec.hash()) + " (" + spec.name() + ")");
  }
  const auto config_hash = in.u64();
  const auto m = in.u32();
  const double step = in.f64();
  const auto divisions = in.u32();
  const auto states = in.u64();
  const auto actions = in.u32();
  const auto prefs = in.u64();
  const double discount = in.f64();
  PreferenceSpace space(m, step);
  if (space.divisions() != divisions || space.size() != prefs || states != spec.state_count() ||
      actions != static_cast<std::uint32_t>(spec.actions())) {
    throw IoError("'" + path.string() + "': header does not match the environment");
  }
  auto values = in.f64s(states * prefs * actions);
  in.expect_end();
  return {QTable(spec, std::move(space), discount, std::move(values)), config_hash};
}

}  // namespace dwpi
