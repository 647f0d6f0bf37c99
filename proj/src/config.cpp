#include "dwpi/config.hpp"

#include <fstream>
#include <set>

#include "dwpi/error.hpp"

namespace dwpi {

namespace {

void check_keys(const nlohmann::json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, _] : j.items()) {
    if (!ok.contains(k)) throw ConfigError("config: unknown key '" + where + "." + k + "'");
  }
}

const nlohmann::json& section(const nlohmann::json& j, const char* name) {
  static const nlohmann::json empty = nlohmann::json::object();
  return j.contains(name) ? j.at(name) : empty;
}

std::filesystem::path resolve_layout(const std::filesystem::path& p, const std::filesystem::path& base) {
  if (p.is_absolute()) return p;
  for (const auto& dir : {base, std::filesystem::current_path(), std::filesystem::path(DWPI_DATA_DIR).parent_path()}) {
    if (dir.empty()) continue;
    if (std::filesystem::exists(dir / p)) return dir / p;
  }
  return base.empty() ? p : base / p;
}

std::uint64_t hash_json(const nlohmann::json& j) { return fnv1a64(j.dump()); }

}  // namespace

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"episodes", c.episodes}, {"alpha", c.alpha}, {"epsilon_start", c.epsilon_start},
       {"epsilon_end", c.epsilon_end}, {"q_init", c.q_init}};
  j["discount"] = c.discount ? nlohmann::json(*c.discount) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.episodes = j.value("episodes", c.episodes);
  c.alpha = j.value("alpha", c.alpha);
  c.epsilon_start = j.value("epsilon_start", c.epsilon_start);
  c.epsilon_end = j.value("epsilon_end", c.epsilon_end);
  c.q_init = j.value("q_init", c.q_init);
  if (j.contains("discount")) {
    if (j.at("discount").is_null()) {
      c.discount.reset();
    } else {
      c.discount = j.at("discount").get<double>();
    }
  }
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void apply_override(nlohmann::json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  nlohmann::json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (!node->is_object() && !node->is_null()) throw ConfigError("override key '" + key + "' walks through a non-object");
    start = dot + 1;
  }
}

RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  check_keys(j, "config", {"environment", "preference", "agent", "demos", "model", "baselines", "eval", "output", "workers", "seed"});
  RunConfig c;
  try {
    if (!j.contains("seed")) throw ConfigError("config: a master 'seed' is required");
    c.seed = j.at("seed").get<std::uint64_t>();

    const auto& env = section(j, "environment");
    check_keys(env, "environment", {"name", "layout"});
    if (!env.contains("layout")) throw ConfigError("config: 'environment.layout' is required");
    c.layout_path = resolve_layout(env.at("layout").get<std::string>(), base_dir);
    c.env_name = env.value("name", c.layout_path.stem().string());

    const auto& pref = section(j, "preference");
    check_keys(pref, "preference", {"grid_step"});
    c.grid_step = pref.value("grid_step", c.grid_step);

    const auto& agent = section(j, "agent");
    check_keys(agent, "agent", {"episodes", "alpha", "epsilon_start", "epsilon_end", "q_init", "discount"});
    c.agent = agent.get<TrainConfig>();

    const auto& demos = section(j, "demos");
    check_keys(demos, "demos", {"n", "noise_eta", "episodes_per_demo", "split"});
    c.demos.n = demos.value("n", c.demos.n);
    c.demos.noise_eta = demos.value("noise_eta", c.demos.noise_eta);
    c.demos.episodes_per_demo = demos.value("episodes_per_demo", c.demos.episodes_per_demo);
    if (demos.contains("split")) c.demos.split = demos.at("split").get<std::array<double, 3>>();

    const auto& model = section(j, "model");
    check_keys(model, "model", {"hidden", "batch_size", "learning_rate", "max_epochs", "patience", "loss"});
    c.model.hidden = model.value("hidden", c.model.hidden);
    c.model.fit = model.get<FitConfig>();

    const auto& base = section(j, "baselines");
    check_keys(base, "baselines", {"iterations", "mwal_beta", "inner", "pm_tolerance", "bound_margin", "lower", "upper", "solver"});
    c.baseline.iterations = base.value("iterations", c.baseline.iterations);
    if (base.contains("mwal_beta")) {
      const auto& b = base.at("mwal_beta");
      if (b.is_string() && b.get<std::string>() == "auto") {
        c.baseline.mwal_beta.reset();
      } else {
        c.baseline.mwal_beta = b.get<double>();
      }
    }
    if (base.contains("inner")) {
      check_keys(base.at("inner"), "baselines.inner", {"episodes", "alpha", "epsilon_start", "epsilon_end", "q_init", "discount"});
      c.baseline.inner = base.at("inner").get<TrainConfig>();
    }
    c.baseline.pm_tolerance = base.value("pm_tolerance", c.baseline.pm_tolerance);
    c.bound_margin = base.value("bound_margin", c.bound_margin);
    c.baseline.lower = base.value("lower", std::vector<double>{});
    c.baseline.upper = base.value("upper", std::vector<double>{});
    const std::string solver = base.value("solver", "q_learning");
    if (solver == "q_learning") {
      c.baseline.solver = SolverMode::QLearning;
    } else if (solver == "oracle") {
      c.baseline.solver = SolverMode::Oracle;
    } else {
      throw ConfigError("config: baselines.solver must be 'q_learning' or 'oracle'");
    }

    const auto& ev = section(j, "eval");
    check_keys(ev, "eval", {"max_queries"});
    c.eval_max_queries = ev.value("max_queries", c.eval_max_queries);

    c.output_dir = j.value("output", c.output_dir.string());
    c.workers = j.value("workers", c.workers);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (c.workers < 1) throw ConfigError("config: workers must be >= 1");
  if (c.demos.n < 1) throw ConfigError("config: demos.n must be >= 1");
  if (!(c.demos.noise_eta >= 0.0)) throw ConfigError("config: demos.noise_eta must be >= 0");
  c.agent.validate();
  c.model.fit.validate();
  return c;
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json model = c.model.fit;
  model.erase("seed");  // derived from the master seed
  model["hidden"] = c.model.hidden;
  nlohmann::json base = {{"iterations", c.baseline.iterations},
                         {"inner", c.baseline.inner},
                         {"pm_tolerance", c.baseline.pm_tolerance},
                         {"bound_margin", c.bound_margin},
                         {"solver", c.baseline.solver == SolverMode::Oracle ? "oracle" : "q_learning"}};
  base["mwal_beta"] = c.baseline.mwal_beta ? nlohmann::json(*c.baseline.mwal_beta) : nlohmann::json("auto");
  if (!c.baseline.lower.empty()) base["lower"] = c.baseline.lower;
  if (!c.baseline.upper.empty()) base["upper"] = c.baseline.upper;
  return {{"environment", {{"name", c.env_name}, {"layout", c.layout_path.string()}}},
          {"preference", {{"grid_step", c.grid_step}}},
          {"agent", c.agent},
          {"demos",
           {{"n", c.demos.n},
            {"noise_eta", c.demos.noise_eta},
            {"episodes_per_demo", c.demos.episodes_per_demo},
            {"split", c.demos.split}}},
          {"model", model},
          {"baselines", base},
          {"eval", {{"max_queries", c.eval_max_queries}}},
          {"output", c.output_dir.string()},
          {"workers", c.workers},
          {"seed", c.seed}};
}

EnvSpec load_env(const RunConfig& c) { return load_layout(c.layout_path); }

PreferenceSpace make_space(const RunConfig& c, const EnvSpec& spec) { return PreferenceSpace(spec.objectives(), c.grid_step); }

BaselineConfig baseline_config(const RunConfig& c, const EnvSpec& spec) {
  BaselineConfig b = c.baseline;
  if (b.lower.empty() || b.upper.empty()) {
    BaselineConfig bounds;
    set_return_bounds(bounds, spec, c.bound_margin);
    if (b.lower.empty()) b.lower = bounds.lower;
    if (b.upper.empty()) b.upper = bounds.upper;
  }
  b.seed = stage_seed(c, Stage::Baselines);
  b.validate(spec.objectives());
  return b;
}

std::uint64_t stage_seed(const RunConfig& c, Stage s) { return derive_seed(c.seed, static_cast<std::uint64_t>(s), 0); }

std::uint64_t agent_config_hash(const RunConfig& c, const EnvSpec& spec) {
  return hash_json({{"spec", hex64(spec.hash())},
                    {"grid_step", c.grid_step},
                    {"agent", c.agent},
                    {"seed", stage_seed(c, Stage::Agent)}});
}

std::uint64_t demos_config_hash(const RunConfig& c, std::uint64_t agent_hash) {
  return hash_json({{"agent", hex64(agent_hash)},
                    {"n", c.demos.n},
                    {"noise_eta", c.demos.noise_eta},
                    {"episodes_per_demo", c.demos.episodes_per_demo},
                    {"split", c.demos.split},
                    {"seed", stage_seed(c, Stage::Demos)}});
}

std::uint64_t model_config_hash(const RunConfig& c, std::uint64_t demos_hash) {
  nlohmann::json fit = c.model.fit;
  return hash_json({{"demos", hex64(demos_hash)},
                    {"hidden", c.model.hidden},
                    {"fit", fit},
                    {"init_seed", stage_seed(c, Stage::ModelInit)},
                    {"fit_seed", stage_seed(c, Stage::Fit)}});
}

std::uint64_t run_config_hash(const RunConfig& c) {
  nlohmann::json j = to_json(c);
  j.erase("output");
  j.erase("workers");
  j["environment"].erase("layout");
  return hash_json(j);
}

}  // namespace dwpi
