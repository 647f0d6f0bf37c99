#include "dwpi/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dwpi/error.hpp"

namespace dwpi {

namespace {

double sorted_mean(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Nearest-rank percentile.
double percentile_of(std::vector<double> v, double pct) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(v.size())));
  rank = std::clamp<std::size_t>(rank, 1, v.size());
  return v[rank - 1];
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

double kl_metric(const PreferenceVector& true_w, const PreferenceVector& inferred, double eps) {
  if (true_w.size() != inferred.size()) throw ConfigError("kl_metric: dimension mismatch");
  const std::size_t m = true_w.size();
  const double zp = 1.0 + eps * static_cast<double>(m);
  double kl = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double p = (true_w[i] + eps) / zp;
    const double q = (inferred[i] + eps) / zp;
    kl += p * std::log(p / q);
  }
  return std::max(kl, 0.0);
}

double mse_metric(const PreferenceVector& true_w, const PreferenceVector& inferred) {
  if (true_w.size() != inferred.size()) throw ConfigError("mse_metric: dimension mismatch");
  return squared_distance(true_w.weights(), inferred.weights()) / static_cast<double>(true_w.size());
}

double utility_gap(const QTable& q, const PreferenceVector& true_w, const PreferenceVector& inferred) {
  const auto& space = q.space();
  const ReturnSummary mine = greedy_rollout(q, space.snap(true_w));
  const ReturnSummary theirs = greedy_rollout(q, space.snap(inferred));
  return scalarize(true_w, mine) - scalarize(true_w, theirs);
}

double utility_metric(const QTable& q, const PreferenceVector& true_w, const PreferenceVector& inferred) {
  return std::max(utility_gap(q, true_w, inferred), 0.0);
}

double oracle_utility_metric(const EnvSpec& spec, const PreferenceVector& true_w, const PreferenceVector& inferred) {
  const double gap = scalarize(true_w, oracle_best(spec, true_w)) - scalarize(true_w, oracle_best(spec, inferred));
  return std::max(gap, 0.0);
}

std::string_view method_name(Method m) {
  switch (m) {
    case Method::Dwpi: return "dwpi";
    case Method::Pm: return "pm";
    case Method::Mwal: return "mwal";
  }
  return "dwpi";
}

std::string regime_name(double eta) { return eta == 0.0 ? "optimal" : "suboptimal"; }

const MethodSummary& EvalReport::summary(Method m, const std::string& regime) const {
  for (const auto& s : summaries) {
    if (s.method == m && s.regime == regime) return s;
  }
  throw Error("report has no entry for " + std::string(method_name(m)) + "/" + regime);
}

std::size_t EvalReport::failed_queries() const {
  return static_cast<std::size_t>(std::count_if(queries.begin(), queries.end(), [](const QueryRecord& r) { return !r.ok; }));
}

MethodSummary summarize(Method m, const std::string& regime, double eta, std::span<const QueryRecord> records) {
  MethodSummary s;
  s.method = m;
  s.regime = regime;
  s.noise_eta = eta;
  std::vector<double> kl, mse, sq, l2, ut, out, secs;
  // The first timed query of each method is a warm-up and is left out of the timing statistics.
  bool warm = false;
  std::vector<const QueryRecord*> mine;
  for (const auto& r : records) {
    if (r.method == m && r.regime == regime) mine.push_back(&r);
  }
  std::sort(mine.begin(), mine.end(), [](auto* a, auto* b) { return a->demo_index < b->demo_index; });
  for (const auto* r : mine) {
    ++s.queries;
    if (!r->ok) {
      ++s.failed;
      continue;
    }
    kl.push_back(r->kl);
    mse.push_back(r->mse);
    sq.push_back(r->squared_l2);
    l2.push_back(std::sqrt(r->squared_l2));
    ut.push_back(r->utility_loss);
    out.push_back(r->oracle_utility_loss);
    if (warm || mine.size() == 1) secs.push_back(r->seconds);
    warm = true;
  }
  s.mean_kl = sorted_mean(kl);
  s.mean_mse = sorted_mean(mse);
  s.mean_squared_l2 = sorted_mean(sq);
  s.mean_l2 = sorted_mean(l2);
  s.mean_utility_loss = sorted_mean(ut);
  s.mean_oracle_utility_loss = sorted_mean(out);
  s.median_seconds = median_of(secs);
  s.p90_seconds = percentile_of(secs, 90.0);
  return s;
}

EvalReport benchmark(const QTable& q, std::span<const RegimeInput> regimes, const EvalConfig& cfg) {
  if (regimes.empty()) throw ConfigError("benchmark: no demo sets given");
  const EnvSpec& spec = q.spec();
  EvalReport rep;
  rep.environment = {{"name", spec.name()}, {"spec_hash", hex64(spec.hash())}, {"objectives", spec.objectives()},
                     {"lattice", q.space().descriptor()}};
  rep.seed = cfg.seed;

  std::vector<Method> methods{Method::Dwpi};
  if (cfg.run_pm) methods.push_back(Method::Pm);
  if (cfg.run_mwal) methods.push_back(Method::Mwal);
  if (cfg.run_pm || cfg.run_mwal) cfg.baseline.validate(spec.objectives());

  using clock = std::chrono::steady_clock;
  for (std::size_t ri = 0; ri < regimes.size(); ++ri) {
    const RegimeInput& in = regimes[ri];
    if (in.demos == nullptr || in.model == nullptr) throw ConfigError("benchmark: regime without demos or model");
    const DemoSet& ds = *in.demos;
    if (ds.spec_hash != spec.hash()) throw ConfigError("benchmark: demo set was generated on a different layout");
    if (!(ds.space == q.space()) || !(in.model->space() == q.space())) {
      throw ConfigError("benchmark: agent, demos and model disagree on the lattice");
    }
    std::vector<std::size_t> picks;
    for (std::size_t i = 0; i < ds.demos.size(); ++i) {
      if (ds.demos[i].split == Split::Test) picks.push_back(i);
    }
    if (picks.empty()) throw ConfigError("benchmark: demo set has no test split");
    const std::size_t test_count = picks.size();
    if (cfg.max_queries > 0 && picks.size() > cfg.max_queries) picks.resize(cfg.max_queries);

    const double eta = ds.demos[picks.front()].noise_eta;
    std::string name = regime_name(eta);
    for (const auto& r : rep.regimes) {
      if (r.name == name) name += "#" + std::to_string(ri);
    }
    rep.regimes.push_back({name, eta, demos_hash(ds), test_count, picks.size(), in.training_seconds});

    for (Method method : methods) {
      for (std::size_t idx : picks) {
        const Demonstration& d = ds.demos[idx];
        QueryRecord rec;
        rec.method = method;
        rec.regime = name;
        rec.demo_index = idx;
        rec.target = d.target.data();
        try {
          std::optional<PreferenceVector> inferred;
          const auto t0 = clock::now();
          if (method == Method::Dwpi) {
            inferred = infer(*in.model, d.features).raw;
          } else {
            BaselineConfig bc = cfg.baseline;
            bc.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(method), d.seed);
            inferred = method == Method::Pm ? pm_infer(spec, d.features, bc).inferred
                                            : mwal_infer(spec, d.features, bc).inferred;
          }
          rec.seconds = std::chrono::duration<double>(clock::now() - t0).count();
          rec.inferred = inferred->data();
          rec.kl = kl_metric(d.target, *inferred);
          rec.mse = mse_metric(d.target, *inferred);
          rec.squared_l2 = squared_distance(d.target.weights(), inferred->weights());
          rec.utility_loss = utility_metric(q, d.target, *inferred);
          rec.oracle_utility_loss = oracle_utility_metric(spec, d.target, *inferred);
        } catch (const std::exception& e) {
          rec.ok = false;
          rec.error = e.what();
        }
        rep.queries.push_back(std::move(rec));
      }
      rep.summaries.push_back(summarize(method, name, eta, rep.queries));
    }
  }
  return rep;
}

DominanceCheck dwpi_dominates(const EvalReport& report, double tol) {
  DominanceCheck out;
  for (const auto& reg : report.regimes) {
    const MethodSummary& d = report.summary(Method::Dwpi, reg.name);
    for (const auto& s : report.summaries) {
      if (s.regime != reg.name || s.method == Method::Dwpi) continue;
      auto check = [&](const char* metric, double mine, double theirs) {
        if (mine > theirs + tol) {
          out.ok = false;
          out.violations.push_back(reg.name + ": dwpi " + metric + " " + fmt(mine) + " > " +
                                   std::string(method_name(s.method)) + " " + fmt(theirs));
        }
      };
      check("kl", d.mean_kl, s.mean_kl);
      check("mse", d.mean_mse, s.mean_mse);
      check("utility_loss", d.mean_utility_loss, s.mean_utility_loss);
    }
  }
  return out;
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json regimes = nlohmann::json::array();
  for (const auto& g : r.regimes) {
    regimes.push_back({{"name", g.name},
                       {"noise_eta", g.noise_eta},
                       {"demos_hash", hex64(g.demos_hash)},
                       {"test_demos", g.test_demos},
                       {"queried", g.queried},
                       {"dwpi_training_seconds", g.dwpi_training_seconds}});
  }
  nlohmann::json sums = nlohmann::json::array();
  for (const auto& s : r.summaries) {
    sums.push_back({{"method", method_name(s.method)},
                    {"regime", s.regime},
                    {"noise_eta", s.noise_eta},
                    {"queries", s.queries},
                    {"failed", s.failed},
                    {"mean_kl", s.mean_kl},
                    {"mean_mse", s.mean_mse},
                    {"mean_squared_l2", s.mean_squared_l2},
                    {"mean_l2", s.mean_l2},
                    {"mean_utility_loss", s.mean_utility_loss},
                    {"mean_oracle_utility_loss", s.mean_oracle_utility_loss},
                    {"median_seconds", s.median_seconds},
                    {"p90_seconds", s.p90_seconds}});
  }
  nlohmann::json qs = nlohmann::json::array();
  for (const auto& q : r.queries) {
    nlohmann::json j = {{"method", method_name(q.method)}, {"regime", q.regime}, {"demo_index", q.demo_index},
                        {"ok", q.ok},                      {"target", q.target}, {"seconds", q.seconds}};
    if (q.ok) {
      j["inferred"] = q.inferred;
      j["kl"] = q.kl;
      j["mse"] = q.mse;
      j["squared_l2"] = q.squared_l2;
      j["utility_loss"] = q.utility_loss;
      j["oracle_utility_loss"] = q.oracle_utility_loss;
    } else {
      j["error"] = q.error;
    }
    qs.push_back(std::move(j));
  }
  return {{"environment", r.environment},
          {"config_hash", hex64(r.config_hash)},
          {"seed", r.seed},
          {"kl_epsilon", kKlEpsilon},
          {"utility", "loss: scalarized return forgone under the true weight, clipped at 0"},
          {"failed_queries", r.failed_queries()},
          {"regimes", regimes},
          {"summaries", sums},
          {"queries", qs}};
}

std::string metrics_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "environment,method,regime,noise_eta,metric,value\n";
  const std::string env = r.environment.value("name", "");
  for (const auto& s : r.summaries) {
    const std::string prefix = env + "," + std::string(method_name(s.method)) + "," + s.regime + "," + fmt(s.noise_eta) + ",";
    os << prefix << "queries," << s.queries << '\n';
    os << prefix << "failed," << s.failed << '\n';
    os << prefix << "mean_kl," << fmt(s.mean_kl) << '\n';
    os << prefix << "mean_mse," << fmt(s.mean_mse) << '\n';
    os << prefix << "mean_squared_l2," << fmt(s.mean_squared_l2) << '\n';
    os << prefix << "mean_l2," << fmt(s.mean_l2) << '\n';
    os << prefix << "mean_utility_loss," << fmt(s.mean_utility_loss) << '\n';
    os << prefix << "mean_oracle_utility_loss," << fmt(s.mean_oracle_utility_loss) << '\n';
  }
  return os.str();
}

std::string timing_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "environment,method,regime,kind,demo_index,seconds\n";
  const std::string env = r.environment.value("name", "");
  for (const auto& g : r.regimes) {
    os << env << ",dwpi," << g.name << ",training,," << fmt(g.dwpi_training_seconds) << '\n';
  }
  for (const auto& q : r.queries) {
    if (!q.ok) continue;
    os << env << ',' << method_name(q.method) << ',' << q.regime << ",query," << q.demo_index << ',' << fmt(q.seconds)
       << '\n';
  }
  for (const auto& s : r.summaries) {
    os << env << ',' << method_name(s.method) << ',' << s.regime << ",median,," << fmt(s.median_seconds) << '\n';
    os << env << ',' << method_name(s.method) << ',' << s.regime << ",p90,," << fmt(s.p90_seconds) << '\n';
  }
  return os.str();
}

void write_report(const std::filesystem::path& dir, const EvalReport& r) {
  std::filesystem::create_directories(dir);
  auto put = [&](const char* name, const std::string& body) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + (dir / name).string() + "'");
    out << body;
  };
  put("report.json", to_json(r).dump(2) + "\n");
  put("metrics.csv", metrics_csv(r));
  put("timing.csv", timing_csv(r));
}

}  // namespace dwpi
