#include "dwpi/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include "dwpi/error.hpp"

namespace dwpi {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_text(const fs::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + p.string() + "'");
  out << body;
}

std::string eta_tag(double eta) {
  std::ostringstream os;
  os << eta;
  return os.str();
}

}  // namespace

fs::path prepare_output(const RunConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  write_text(cfg.output_dir / "config.json", to_json(cfg).dump(2) + "\n");
  return cfg.output_dir;
}

AgentStage stage_train_agent(const RunConfig& cfg, const EnvSpec& spec) {
  const auto space = make_space(cfg, spec);
  const auto out = prepare_output(cfg);
  TrainConfig tc = cfg.agent;
  tc.seed = stage_seed(cfg, Stage::Agent);
  const auto t0 = std::chrono::steady_clock::now();
  QTable q = train_agent(spec, space, tc);
  const double secs = seconds_since(t0);
  const double match = oracle_match_fraction(q);
  const auto hash = agent_config_hash(cfg, spec);
  const fs::path path = out / "agent.qtab";
  save_qtable(path, q, hash);
  json train = tc;
  train["seed"] = tc.seed;
  const json side = {{"format", "dwpi-qtable"},       {"spec_hash", hex64(spec.hash())},
                     {"config_hash", hex64(hash)},      {"environment", spec.name()},
                     {"lattice", space.descriptor()},   {"train", train},
                     {"oracle_match", match},           {"wall_seconds", secs}};
  write_text(sidecar_path(path), side.dump(2) + "\n");
  return {std::move(q), hash, match, secs, path};
}

DemoStage stage_gen_demos(const RunConfig& cfg, const QTable& q) {
  const EnvSpec& spec = q.spec();
  const auto out = prepare_output(cfg);
  const NoiseSpec noise(cfg.demos.noise_eta, return_ranges(spec));
  auto ds = generate_demos(q, q.space(), noise, cfg.demos.n, stage_seed(cfg, Stage::Demos),
                           {cfg.demos.episodes_per_demo, cfg.workers});
  ds = split(std::move(ds), cfg.demos.split, stage_seed(cfg, Stage::Split));
  ds.agent_hash = agent_config_hash(cfg, spec);
  ds.config_hash = demos_config_hash(cfg, ds.agent_hash);
  const fs::path path = out / ("demos_eta" + eta_tag(cfg.demos.noise_eta) + ".jsonl");
  save_demos(path, ds);
  return {std::move(ds), path};
}

ModelStage stage_train_dwpi(const RunConfig& cfg, const DemoSet& ds, const std::string& name) {
  const auto out = prepare_output(cfg);
  FitConfig fc = cfg.model.fit;
  fc.seed = stage_seed(cfg, Stage::Fit);
  const auto init = make_model(ds, cfg.model.hidden, stage_seed(cfg, Stage::ModelInit));
  const auto t0 = std::chrono::steady_clock::now();
  FitResult res = fit(init, ds, fc);
  const double secs = seconds_since(t0);

  const auto dh = demos_hash(ds);
  json history = json::array();
  std::ostringstream curve;
  curve.precision(17);
  curve << "epoch,train_loss,validation_loss\n";
  for (const auto& h : res.history) {
    history.push_back({h.epoch, h.train_loss, h.validation_loss});
    curve << h.epoch << ',' << h.train_loss << ',' << h.validation_loss << '\n';
  }
  json fit_json = fc;
  ModelMeta meta{ds.spec_hash, dh, model_config_hash(cfg, dh),
                 {{"fit", fit_json},
                  {"hidden", cfg.model.hidden},
                  {"best_epoch", res.best_epoch},
                  {"best_validation_loss", res.best_validation_loss},
                  {"epochs_run", res.history.size()},
                  {"wall_seconds", secs},
                  {"history", history}}};
  const fs::path path = out / ("model_" + name + ".bin");
  save_model(path, res.model, meta);
  write_text(out / ("loss_" + name + ".csv"), curve.str());
  return {std::move(res), secs, path};
}

EvalReport stage_eval(const RunConfig& cfg, const QTable& q, std::span<const RegimeInput> regimes) {
  EvalConfig ec;
  ec.baseline = baseline_config(cfg, q.spec());
  ec.max_queries = cfg.eval_max_queries;
  ec.seed = stage_seed(cfg, Stage::Eval);
  EvalReport report = benchmark(q, regimes, ec);
  report.config_hash = run_config_hash(cfg);
  write_report(prepare_output(cfg), report);
  return report;
}

QTable load_agent_checked(const fs::path& path, const RunConfig& cfg, const EnvSpec& spec) {
  auto loaded = load_qtable(path, spec);
  const auto expected = agent_config_hash(cfg, spec);
  if (loaded.config_hash != expected) {
    throw ConfigError("agent '" + path.string() + "' was produced by config " + hex64(loaded.config_hash) +
                      " but the current config hashes to " + hex64(expected) +
                      "; retrain or use the matching config and seed");
  }
  return std::move(loaded.table);
}

DemoSet load_demos_checked(const fs::path& path, const EnvSpec& spec, std::uint64_t agent_hash) {
  auto ds = load_demos(path);
  if (ds.spec_hash != spec.hash()) {
    throw ConfigError("demos '" + path.string() + "' were generated on layout " + hex64(ds.spec_hash) + ", not " +
                      hex64(spec.hash()));
  }
  if (ds.agent_hash != agent_hash) {
    throw ConfigError("demos '" + path.string() + "' come from agent " + hex64(ds.agent_hash) +
                      ", the current config's agent is " + hex64(agent_hash));
  }
  return ds;
}

LoadedModel load_model_checked(const fs::path& path, const EnvSpec& spec, const DemoSet& ds) {
  auto lm = load_model(path);
  if (lm.meta.spec_hash != spec.hash()) throw ConfigError("model '" + path.string() + "' belongs to another layout");
  if (lm.meta.demos_hash != demos_hash(ds)) {
    throw ConfigError("model '" + path.string() + "' was not trained on this demo set");
  }
  return lm;
}

}  // namespace dwpi
