#include "dwpi/demos.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include "dwpi/error.hpp"

namespace dwpi {

namespace {
constexpr std::uint64_t kDemoStream = 0xde30;
constexpr int kDemoFormatVersion = 1;
}  // namespace

std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "train";
}

Split split_from_name(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "validation") return Split::Validation;
  if (name == "test") return Split::Test;
  throw ConfigError("unknown split label '" + std::string(name) + "'");
}

std::vector<Demonstration> DemoSet::subset(Split s) const {
  std::vector<Demonstration> out;
  for (const auto& d : demos) {
    if (d.split == s) out.push_back(d);
  }
  return out;
}

std::size_t DemoSet::count(Split s) const {
  return static_cast<std::size_t>(
      std::count_if(demos.begin(), demos.end(), [s](const Demonstration& d) { return d.split == s; }));
}

DemoSet generate_demos(const QTable& q, const PreferenceSpace& space, const NoiseSpec& noise, std::size_t n,
                       std::uint64_t seed, const DemoOptions& opts) {
  if (n < 1) throw ConfigError("generate_demos: n must be >= 1");
  if (!(q.space() == space)) throw ConfigError("generate_demos: agent was trained on a different lattice");
  if (noise.per_objective_range.size() != space.objectives()) {
    throw ConfigError("generate_demos: noise range has the wrong dimension");
  }
  if (opts.episodes_per_demo < 1) throw ConfigError("generate_demos: episodes_per_demo must be >= 1");

  DemoSet ds(space);
  ds.spec_hash = q.spec().hash();
  std::vector<std::optional<Demonstration>> slots(n);

  auto make = [&](std::size_t i) {
    const std::uint64_t demo_seed = derive_seed(seed, kDemoStream, i);
    Rng rng(demo_seed);
    const PreferenceVector& w = sample_preference(space, rng);
    ReturnSummary clean(space.objectives());
    for (std::size_t e = 0; e < opts.episodes_per_demo; ++e) {
      clean += greedy_rollout(q, w, derive_seed(demo_seed, 1, e));
    }
    clean *= 1.0 / static_cast<double>(opts.episodes_per_demo);
    const RewardVector delta = sample_noise(noise, rng);
    slots[i] = Demonstration{clean + delta, w, noise.eta, demo_seed, Split::Train};
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(opts.workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) make(i);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < n; i += workers) make(i);
      });
    }
  }
  ds.demos.reserve(n);
  for (auto& s : slots) ds.demos.push_back(std::move(*s));
  return ds;
}

FeatureStats feature_stats(const DemoSet& ds) {
  const std::size_t m = ds.objectives();
  FeatureStats st{std::vector<double>(m, 0.0), std::vector<double>(m, 0.0)};
  std::size_t n = 0;
  for (const auto& d : ds.demos) {
    if (d.split != Split::Train) continue;
    for (std::size_t i = 0; i < m; ++i) st.mean[i] += d.features[i];
    ++n;
  }
  if (n == 0) throw ConfigError("feature_stats: the train split is empty");
  for (double& v : st.mean) v /= static_cast<double>(n);
  for (const auto& d : ds.demos) {
    if (d.split != Split::Train) continue;
    for (std::size_t i = 0; i < m; ++i) {
      const double c = d.features[i] - st.mean[i];
      st.stddev[i] += c * c;
    }
  }
  for (double& v : st.stddev) v = std::max(std::sqrt(v / static_cast<double>(n)), FeatureStats::kStdFloor);
  return st;
}

DemoSet split(DemoSet ds, const std::array<double, 3>& fractions, std::uint64_t seed) {
  double total = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw ConfigError("split fractions must be non-negative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  const std::size_t n = ds.demos.size();
  constexpr std::size_t B = 3;

  std::array<long, B> col_target{};
  col_target[0] = std::lround(fractions[0] * static_cast<double>(n));
  col_target[1] = std::lround(fractions[1] * static_cast<double>(n));
  col_target[1] = std::min<long>(col_target[1], static_cast<long>(n) - col_target[0]);
  col_target[2] = static_cast<long>(n) - col_target[0] - col_target[1];
  const auto positive = static_cast<std::size_t>(std::count_if(fractions.begin(), fractions.end(),
                                                               [](double f) { return f > 0.0; }));

  // Groups in lattice order; members shuffled.
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[ds.space.nearest_index(ds.demos[i].target.weights())].push_back(i);
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> members;
  for (auto& [_, idx] : groups) {
    shuffle(idx, rng);
    members.push_back(std::move(idx));
  }
  const std::size_t G = members.size();
  std::vector<std::array<long, B>> alloc(G);
  std::vector<long> row_left(G);
  std::array<long, B> col_left = col_target;
  struct Candidate {
    double remainder;
    std::size_t g, b;
  };
  std::vector<Candidate> candidates;
  for (std::size_t g = 0; g < G; ++g) {
    const auto k = static_cast<long>(members[g].size());
    long used = 0;
    for (std::size_t b = 0; b < B; ++b) {
      const double ideal = fractions[b] * static_cast<double>(k);
      long c = static_cast<long>(std::floor(ideal));
      if (fractions[b] > 0.0 && c == 0 && static_cast<std::size_t>(k) >= positive) c = 1;
      alloc[g][b] = c;
      used += c;
      if (fractions[b] > 0.0) candidates.push_back({ideal - std::floor(ideal), g, b});
    }
    // Minimum-one bumps can overshoot tiny groups; take back from the largest bucket.
    while (used > k) {
      auto& row = alloc[g];
      const auto big = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
      --row[big];
      --used;
    }
    row_left[g] = k - used;
    for (std::size_t b = 0; b < B; ++b) col_left[b] -= alloc[g][b];
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.remainder > b.remainder; });
  for (const auto& c : candidates) {
    if (row_left[c.g] > 0 && col_left[c.b] > 0) {
      ++alloc[c.g][c.b];
      --row_left[c.g];
      --col_left[c.b];
    }
  }
  for (std::size_t g = 0; g < G; ++g) {
    while (row_left[g] > 0) {
      std::size_t b = static_cast<std::size_t>(std::max_element(col_left.begin(), col_left.end()) - col_left.begin());
      if (col_left[b] <= 0) {
        b = static_cast<std::size_t>(std::max_element(fractions.begin(), fractions.end()) - fractions.begin());
      }
      ++alloc[g][b];
      --row_left[g];
      --col_left[b];
    }
  }
  for (std::size_t g = 0; g < G; ++g) {
    std::size_t pos = 0;
    for (std::size_t b = 0; b < B; ++b) {
      for (long c = 0; c < alloc[g][b]; ++c) ds.demos[members[g][pos++]].split = static_cast<Split>(b);
    }
  }
  return ds;
}

namespace {

nlohmann::json header_json(const DemoSet& ds) {
  return {{"format", "dwpi-demos"},
          {"version", kDemoFormatVersion},
          {"spec_hash", hex64(ds.spec_hash)},
          {"agent_hash", hex64(ds.agent_hash)},
          {"config_hash", hex64(ds.config_hash)},
          {"lattice", ds.space.descriptor()},
          {"count", ds.demos.size()}};
}

}  // namespace

std::string demos_to_jsonl(const DemoSet& ds) {
  std::ostringstream os;
  os << header_json(ds).dump() << '\n';
  for (const auto& d : ds.demos) {
    nlohmann::json row = {{"features", d.features},
                          {"target", d.target},
                          {"noise_eta", d.noise_eta},
                          {"seed", d.seed},
                          {"split", split_name(d.split)}};
    os << row.dump() << '\n';
  }
  return os.str();
}

std::uint64_t demos_hash(const DemoSet& ds) { return fnv1a64(demos_to_jsonl(ds)); }

DemoSet demos_from_jsonl(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) -> IoError {
    return IoError(source + ":" + std::to_string(line_no) + ": " + what);
  };
  if (!std::getline(in, line)) {
    line_no = 1;
    throw fail("missing header line");
  }
  line_no = 1;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("malformed header: ") + e.what());
  }
  if (header.value("format", "") != "dwpi-demos") throw fail("not a demo file");
  if (header.value("version", 0) != kDemoFormatVersion) throw fail("unsupported demo file version");

  try {
    DemoSet ds(PreferenceSpace::from_descriptor(header.at("lattice")));
    ds.spec_hash = parse_hex64(header.at("spec_hash").get<std::string>());
    ds.agent_hash = parse_hex64(header.at("agent_hash").get<std::string>());
    ds.config_hash = parse_hex64(header.at("config_hash").get<std::string>());
    const auto count = header.at("count").get<std::size_t>();
    ds.demos.reserve(count);
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        const auto row = nlohmann::json::parse(line);
        Demonstration d{row.at("features").get<RewardVector>(), row.at("target").get<PreferenceVector>(),
                        row.at("noise_eta").get<double>(), row.at("seed").get<std::uint64_t>(),
                        split_from_name(row.at("split").get<std::string>())};
        if (d.features.size() != ds.objectives() || d.target.size() != ds.objectives()) {
          throw fail("dimension does not match the lattice");
        }
        if (!d.features.all_finite()) throw fail("non-finite feature");
        ds.demos.push_back(std::move(d));
      } catch (const nlohmann::json::exception& e) {
        throw fail(std::string("malformed demo: ") + e.what());
      } catch (const ConfigError& e) {
        throw fail(e.what());
      }
    }
    if (ds.demos.size() != count) {
      throw IoError(source + ": header announces " + std::to_string(count) + " demos, found " +
                    std::to_string(ds.demos.size()));
    }
    return ds;
  } catch (const nlohmann::json::exception& e) {
    line_no = 1;
    throw fail(std::string("malformed header: ") + e.what());
  }
}

void save_demos(const std::filesystem::path& path, const DemoSet& ds) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << demos_to_jsonl(ds);
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

DemoSet load_demos(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open demo file '" + path.string() + "'");
  return demos_from_jsonl(in, path.string());
}

}  // namespace dwpi
