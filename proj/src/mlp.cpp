#include "dwpi/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "dwpi/binary_io.hpp"
#include "dwpi/error.hpp"
#include "dwpi/rng.hpp"

namespace dwpi {

namespace {

constexpr std::string_view kModelMagic = "DWPIMODL";
constexpr std::uint32_t kModelVersion = 1;

// Activations of one forward pass. acts[0] is the normalized input, acts.back()
// the softmax output.
struct Tape {
  std::vector<std::vector<double>> acts;
};

void check_features(const MlpModel& model, std::span<const double> f) {
  if (f.size() != model.objectives()) throw ConfigError("feature vector has the wrong dimension");
  for (double v : f) {
    if (!std::isfinite(v)) throw ConfigError("feature vector is not finite");
  }
}

void softmax_inplace(std::vector<double>& z) {
  const double top = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - top);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

// Parameters under training are updated in place, so the core routines take them separately.
struct View {
  const std::vector<std::size_t>& sizes;
  const FeatureStats& norm;
  std::span<const double> params;
};

View view_of(const MlpModel& m) { return {m.layer_sizes(), m.normalizer(), m.params()}; }

void run(const View& net, std::span<const double> f, Tape& tape) {
  const auto& sizes = net.sizes;
  const auto& norm = net.norm;
  const std::span<const double> p = net.params;
  const std::size_t L = sizes.size() - 1;
  tape.acts.resize(L + 1);
  tape.acts[0].resize(sizes[0]);
  for (std::size_t i = 0; i < sizes[0]; ++i) tape.acts[0][i] = (f[i] - norm.mean[i]) / norm.stddev[i];

  std::size_t off = 0;
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t in = sizes[l], out = sizes[l + 1];
    const double* W = p.data() + off;
    const double* b = W + in * out;
    off += in * out + out;
    const auto& a = tape.acts[l];
    auto& z = tape.acts[l + 1];
    z.assign(out, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      double s = b[o];
      const double* row = W + o * in;
      for (std::size_t i = 0; i < in; ++i) s += row[i] * a[i];
      z[o] = (l + 1 < L) ? std::max(s, 0.0) : s;
    }
  }
  softmax_inplace(tape.acts[L]);
}

double sample_loss(std::span<const double> pred, const PreferenceVector& w, LossKind kind) {
  const double d2 = squared_distance(pred, w.weights());
  return kind == LossKind::SquaredL2 ? d2 : std::sqrt(d2);
}

}  // namespace

std::string_view loss_name(LossKind k) { return k == LossKind::SquaredL2 ? "squared_l2" : "l2"; }

LossKind loss_from_name(std::string_view name) {
  if (name == "squared_l2") return LossKind::SquaredL2;
  if (name == "l2") return LossKind::L2;
  throw ConfigError("unknown loss kind '" + std::string(name) + "' (expected squared_l2 or l2)");
}

void FitConfig::validate() const {
  if (batch_size < 1) throw ConfigError("fit: batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("fit: learning_rate must be > 0");
}

void to_json(nlohmann::json& j, const FitConfig& c) {
  j = {{"batch_size", c.batch_size}, {"learning_rate", c.learning_rate}, {"max_epochs", c.max_epochs},
       {"patience", c.patience},     {"loss", loss_name(c.loss_kind)},   {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, FitConfig& c) {
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  if (j.contains("loss")) c.loss_kind = loss_from_name(j.at("loss").get<std::string>());
  c.seed = j.value("seed", c.seed);
}

std::size_t parameter_count(std::span<const std::size_t> sizes) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += sizes[l] * sizes[l + 1] + sizes[l + 1];
  return n;
}

MlpModel::MlpModel(std::vector<std::size_t> layer_sizes, FeatureStats normalizer, PreferenceSpace space,
                   std::vector<double> params)
    : sizes_(std::move(layer_sizes)), norm_(std::move(normalizer)), space_(std::move(space)), params_(std::move(params)) {
  if (sizes_.size() < 2) throw ConfigError("model needs at least an input and an output layer");
  if (std::find(sizes_.begin(), sizes_.end(), 0u) != sizes_.end()) throw ConfigError("layer sizes must be positive");
  const std::size_t m = sizes_.front();
  if (sizes_.back() != m) throw ConfigError("model output size must equal its input size");
  if (m != space_.objectives()) throw ConfigError("model dimension does not match its lattice");
  if (norm_.mean.size() != m || norm_.stddev.size() != m) throw ConfigError("normalizer has the wrong dimension");
  for (std::size_t i = 0; i < m; ++i) {
    if (!std::isfinite(norm_.mean[i]) || !(norm_.stddev[i] > 0.0) || !std::isfinite(norm_.stddev[i])) {
      throw ConfigError("normalizer must have finite means and positive deviations");
    }
  }
  if (params_.size() != parameter_count(sizes_)) throw ConfigError("parameter count does not match layer sizes");
  for (double v : params_) {
    if (!std::isfinite(v)) throw ConfigError("model parameters must be finite");
  }
}

MlpModel MlpModel::initialized(std::vector<std::size_t> layer_sizes, FeatureStats normalizer, PreferenceSpace space,
                               std::uint64_t seed) {
  std::vector<double> p(parameter_count(layer_sizes), 0.0);
  Rng rng(seed);
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const std::size_t in = layer_sizes[l], out = layer_sizes[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in));
    for (std::size_t k = 0; k < in * out; ++k) p[off + k] = rng.uniform(-limit, limit);
    off += in * out + out;
  }
  return MlpModel(std::move(layer_sizes), std::move(normalizer), std::move(space), std::move(p));
}

MlpModel MlpModel::zeros(std::vector<std::size_t> layer_sizes, FeatureStats normalizer, PreferenceSpace space) {
  std::vector<double> p(parameter_count(layer_sizes), 0.0);
  return MlpModel(std::move(layer_sizes), std::move(normalizer), std::move(space), std::move(p));
}

MlpModel MlpModel::with_params(std::vector<double> params) const { return MlpModel(sizes_, norm_, space_, std::move(params)); }

MlpModel make_model(const DemoSet& ds, std::span<const std::size_t> hidden, std::uint64_t seed) {
  std::vector<std::size_t> sizes{ds.objectives()};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(ds.objectives());
  return MlpModel::initialized(std::move(sizes), feature_stats(ds), ds.space, seed);
}

PreferenceVector forward(const MlpModel& model, const ReturnSummary& f) {
  check_features(model, f.values());
  Tape tape;
  run(view_of(model), f.values(), tape);
  return PreferenceVector(std::move(tape.acts.back()));
}

double loss(const MlpModel& model, std::span<const Demonstration> batch, LossKind kind) {
  if (batch.empty()) throw ConfigError("loss: empty batch");
  Tape tape;
  double total = 0.0;
  for (const auto& d : batch) {
    check_features(model, d.features.values());
    run(view_of(model), d.features.values(), tape);
    total += sample_loss(tape.acts.back(), d.target, kind);
  }
  return total / static_cast<double>(batch.size());
}

namespace {

void accumulate_gradient(const View& net, std::span<const Demonstration> batch, LossKind kind, std::vector<double>& grad) {
  const auto& sizes = net.sizes;
  const std::span<const double> p = net.params;
  const std::size_t L = sizes.size() - 1;
  std::vector<std::size_t> offsets(L);
  for (std::size_t l = 0, off = 0; l < L; ++l) {
    offsets[l] = off;
    off += sizes[l] * sizes[l + 1] + sizes[l + 1];
  }

  grad.assign(p.size(), 0.0);
  Tape tape;
  std::vector<double> delta, below;
  for (const auto& d : batch) {
    run(net, d.features.values(), tape);
    const auto& out = tape.acts[L];
    const std::size_t m = out.size();

    // dL/dp, then through the softmax Jacobian.
    std::vector<double> gp(m);
    double norm = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      gp[i] = out[i] - d.target[i];
      norm += gp[i] * gp[i];
    }
    norm = std::sqrt(norm);
    for (double& g : gp) {
      if (kind == LossKind::SquaredL2) {
        g *= 2.0;
      } else {
        g = norm > 0.0 ? g / norm : 0.0;
      }
    }
    const double dot = std::inner_product(gp.begin(), gp.end(), out.begin(), 0.0);
    delta.resize(m);
    for (std::size_t i = 0; i < m; ++i) delta[i] = out[i] * (gp[i] - dot);

    for (std::size_t l = L; l-- > 0;) {
      const std::size_t in = sizes[l], n_out = sizes[l + 1];
      const double* W = p.data() + offsets[l];
      double* gW = grad.data() + offsets[l];
      double* gb = gW + in * n_out;
      const auto& a = tape.acts[l];
      for (std::size_t o = 0; o < n_out; ++o) {
        const double dz = delta[o];
        if (dz == 0.0) continue;
        double* row = gW + o * in;
        for (std::size_t i = 0; i < in; ++i) row[i] += dz * a[i];
        gb[o] += dz;
      }
      if (l == 0) break;
      below.assign(in, 0.0);
      for (std::size_t o = 0; o < n_out; ++o) {
        const double dz = delta[o];
        if (dz == 0.0) continue;
        const double* row = W + o * in;
        for (std::size_t i = 0; i < in; ++i) below[i] += row[i] * dz;
      }
      for (std::size_t i = 0; i < in; ++i) {
        if (!(a[i] > 0.0)) below[i] = 0.0;
      }
      delta.swap(below);
    }
  }
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (double& g : grad) g *= scale;
}

}  // namespace

std::vector<double> backward(const MlpModel& model, std::span<const Demonstration> batch, LossKind kind) {
  if (batch.empty()) throw ConfigError("backward: empty batch");
  for (const auto& d : batch) check_features(model, d.features.values());
  std::vector<double> grad;
  accumulate_gradient(view_of(model), batch, kind, grad);
  return grad;
}

FitResult fit(const MlpModel& initial, const DemoSet& ds, const FitConfig& cfg) {
  cfg.validate();
  if (!(ds.space == initial.space())) throw ConfigError("fit: demos and model use different lattices");
  std::vector<Demonstration> train = ds.subset(Split::Train);
  const std::vector<Demonstration> val = ds.subset(Split::Validation);
  if (train.empty() || val.empty()) throw ConfigError("fit: demo set needs non-empty train and validation splits");

  FitResult res{initial, {}, 0, 0.0};
  if (cfg.max_epochs == 0) {
    res.best_validation_loss = loss(initial, val, cfg.loss_kind);
    return res;
  }
  for (const auto& d : train) check_features(initial, d.features.values());
  std::vector<double> params(initial.params().begin(), initial.params().end());
  const View net{initial.layer_sizes(), initial.normalizer(), params};
  std::vector<double> g;
  double best = loss(initial, val, cfg.loss_kind);
  if (!std::isfinite(best)) throw Error("fit: initial validation loss is not finite");
  res.best_validation_loss = best;
  std::size_t since_best = 0;
  Rng rng(cfg.seed);

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle(train, rng);
    for (std::size_t start = 0; start < train.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, train.size() - start);
      accumulate_gradient(net, std::span(train).subspan(start, len), cfg.loss_kind, g);
      for (std::size_t k = 0; k < params.size(); ++k) params[k] -= cfg.learning_rate * g[k];
    }
    for (double v : params) {
      if (!std::isfinite(v)) throw Error("fit: training diverged at epoch " + std::to_string(epoch));
    }
    const MlpModel current = initial.with_params(params);
    const double tl = loss(current, train, cfg.loss_kind);
    const double vl = loss(current, val, cfg.loss_kind);
    if (!std::isfinite(tl) || !std::isfinite(vl)) {
      throw Error("fit: training diverged at epoch " + std::to_string(epoch));
    }
    res.history.push_back({epoch, tl, vl});
    if (vl < best) {
      best = vl;
      res.model = current;
      res.best_epoch = epoch;
      res.best_validation_loss = vl;
      since_best = 0;
    } else if (++since_best >= cfg.patience && cfg.patience > 0) {
      break;
    }
  }
  return res;
}

Inference infer(const MlpModel& model, const ReturnSummary& f) {
  PreferenceVector raw = forward(model, f);
  const std::size_t idx = model.space().nearest_index(raw.weights());
  return {raw, model.space()[idx], idx};
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".json";
  return p;
}

void save_model(const std::filesystem::path& path, const MlpModel& model, const ModelMeta& meta) {
  BinaryWriter w(path);
  w.magic(kModelMagic);
  w.u32(kModelVersion);
  w.u64(meta.spec_hash);
  w.u64(meta.demos_hash);
  w.u64(meta.config_hash);
  w.u64(model.space().divisions());
  w.u32(static_cast<std::uint32_t>(model.layer_sizes().size()));
  for (std::size_t s : model.layer_sizes()) w.u64(s);
  w.f64s(model.normalizer().mean);
  w.f64s(model.normalizer().stddev);
  w.u64(model.param_count());
  w.f64s(model.params());
  w.close();

  nlohmann::json side = {{"format", "dwpi-model"},
                         {"version", kModelVersion},
                         {"spec_hash", hex64(meta.spec_hash)},
                         {"demos_hash", hex64(meta.demos_hash)},
                         {"config_hash", hex64(meta.config_hash)},
                         {"layer_sizes", model.layer_sizes()},
                         {"lattice", model.space().descriptor()},
                         {"normalizer", {{"mean", model.normalizer().mean}, {"std", model.normalizer().stddev}}},
                         {"training", meta.training}};
  std::ofstream out(sidecar_path(path), std::ios::trunc);
  if (!out) throw IoError("cannot write model sidecar for '" + path.string() + "'");
  out << side.dump(2) << '\n';
}

LoadedModel load_model(const std::filesystem::path& path) {
  BinaryReader r(path);
  r.expect_magic(kModelMagic);
  if (r.u32() != kModelVersion) throw IoError("'" + path.string() + "': unsupported model version");
  ModelMeta meta;
  meta.spec_hash = r.u64();
  meta.demos_hash = r.u64();
  meta.config_hash = r.u64();
  const std::uint64_t divisions = r.u64();
  const std::uint32_t n_layers = r.u32();
  if (n_layers < 2 || n_layers > 64) throw IoError("'" + path.string() + "': implausible layer count");
  std::vector<std::size_t> sizes(n_layers);
  for (auto& s : sizes) {
    s = r.u64();
    if (s == 0 || s > (1u << 20)) throw IoError("'" + path.string() + "': implausible layer size");
  }
  const std::size_t m = sizes.front();
  FeatureStats norm{r.f64s(m), r.f64s(m)};
  const std::uint64_t count = r.u64();
  if (count != parameter_count(sizes)) throw IoError("'" + path.string() + "': parameter count mismatch");
  std::vector<double> params = r.f64s(count);
  r.expect_end();
  if (divisions == 0) throw IoError("'" + path.string() + "': bad lattice");
  PreferenceSpace space(m, 1.0 / static_cast<double>(divisions));

  std::ifstream side(sidecar_path(path));
  if (side) {
    try {
      meta.training = nlohmann::json::parse(side).value("training", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
      throw IoError("'" + sidecar_path(path).string() + "': " + e.what());
    }
  }
  try {
    return {MlpModel(std::move(sizes), std::move(norm), std::move(space), std::move(params)), meta};
  } catch (const ConfigError& e) {
    throw IoError("'" + path.string() + "': " + e.what());
  }
}

}  // namespace dwpi
