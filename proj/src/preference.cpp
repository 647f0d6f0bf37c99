#include "dwpi/preference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dwpi/error.hpp"

namespace dwpi {

RewardVector& RewardVector::operator+=(const RewardVector& other) {
  if (other.size() != size()) {
    throw ConfigError("reward vector dimension mismatch: " + std::to_string(size()) + " vs " +
                      std::to_string(other.size()));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

RewardVector& RewardVector::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

bool RewardVector::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

PreferenceVector::PreferenceVector(std::vector<double> weights) : weights_(std::move(weights)) {
  if (weights_.size() < 2) {
    throw ConfigError("preference vector needs at least 2 components, got " +
                      std::to_string(weights_.size()));
  }
  double sum = 0.0;
  for (double w : weights_) {
    if (!std::isfinite(w) || w < 0.0) {
      throw ConfigError("preference vector components must be finite and non-negative");
    }
    sum += w;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    std::ostringstream os;
    os.precision(17);
    os << "preference vector must sum to 1 (got " << sum << ")";
    throw ConfigError(os.str());
  }
  if (sum != 1.0) {
    for (double& w : weights_) w /= sum;
  }
}

PreferenceVector PreferenceVector::normalized(std::span<const double> raw) {
  std::vector<double> w(raw.begin(), raw.end());
  double sum = 0.0;
  for (double& v : w) {
    if (!std::isfinite(v)) throw ConfigError("cannot normalize a non-finite weight vector");
    v = std::max(v, 0.0);
    sum += v;
  }
  if (!(sum > 0.0)) throw ConfigError("cannot normalize a weight vector with no positive component");
  for (double& v : w) v /= sum;
  return PreferenceVector(std::move(w));
}

PreferenceVector PreferenceVector::uniform(std::size_t m) {
  return PreferenceVector(std::vector<double>(m, 1.0 / static_cast<double>(m)));
}

double scalarize(std::span<const double> w, std::span<const double> r) {
  if (w.size() != r.size()) {
    throw ConfigError("scalarize: preference has " + std::to_string(w.size()) +
                      " components but reward has " + std::to_string(r.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * r[i];
  return acc;
}

double scalarize(const PreferenceVector& w, const RewardVector& r) {
  return scalarize(w.weights(), r.values());
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ConfigError("squared_distance: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc;
}

std::uint64_t simplex_lattice_size(std::size_t m, std::size_t divisions) {
  // C(n, k) with n = divisions + m - 1, k = m - 1, computed incrementally.
  std::uint64_t result = 1;
  const std::uint64_t k = m - 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    result = result * (divisions + i) / i;
  }
  return result;
}

namespace {

void enumerate_compositions(std::size_t m, std::size_t remaining, std::vector<std::size_t>& prefix,
                            std::size_t divisions, std::vector<PreferenceVector>& out) {
  if (prefix.size() + 1 == m) {
    std::vector<double> w(m);
    for (std::size_t i = 0; i < prefix.size(); ++i) {
      w[i] = static_cast<double>(prefix[i]) / static_cast<double>(divisions);
    }
    w[m - 1] = static_cast<double>(remaining) / static_cast<double>(divisions);
    out.emplace_back(std::move(w));
    return;
  }
  for (std::size_t c = 0; c <= remaining; ++c) {
    prefix.push_back(c);
    enumerate_compositions(m, remaining - c, prefix, divisions, out);
    prefix.pop_back();
  }
}

}  // namespace

PreferenceSpace::PreferenceSpace(std::size_t m, double grid_step) : m_(m), grid_step_(grid_step) {
  if (m < 2) throw ConfigError("preference space needs m >= 2");
  if (!(grid_step > 0.0) || grid_step > 1.0) throw ConfigError("grid_step must lie in (0, 1]");
  const double reciprocal = 1.0 / grid_step;
  const double rounded = std::round(reciprocal);
  if (std::abs(reciprocal - rounded) > 1e-9) {
    std::ostringstream os;
    os.precision(17);
    os << "grid_step " << grid_step << " does not divide 1 (1/step = " << reciprocal << ")";
    throw ConfigError(os.str());
  }
  divisions_ = static_cast<std::size_t>(rounded);
  const auto count = simplex_lattice_size(m, divisions_);
  if (count > 10'000'000) throw ConfigError("preference lattice too large");
  points_.reserve(count);
  std::vector<std::size_t> prefix;
  enumerate_compositions(m, divisions_, prefix, divisions_, points_);
}

std::size_t PreferenceSpace::nearest_index(std::span<const double> w) const {
  if (w.size() != m_) throw ConfigError("snap: preference dimension mismatch");
  std::size_t best = 0;
  double best_d = squared_distance(points_[0].weights(), w);
  for (std::size_t i = 1; i < points_.size(); ++i) {
    const double d = squared_distance(points_[i].weights(), w);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

nlohmann::json PreferenceSpace::descriptor() const {
  return {{"m", m_}, {"grid_step", grid_step_}, {"divisions", divisions_}, {"points", points_.size()}};
}

PreferenceSpace PreferenceSpace::from_descriptor(const nlohmann::json& j) {
  PreferenceSpace space(j.at("m").get<std::size_t>(), j.at("grid_step").get<double>());
  if (j.contains("divisions") && j.at("divisions").get<std::size_t>() != space.divisions()) {
    throw ConfigError("lattice descriptor is inconsistent");
  }
  return space;
}

PreferenceSpace enumerate_simplex(std::size_t m, double grid_step) { return {m, grid_step}; }

NoiseSpec::NoiseSpec(double eta_, std::vector<double> range) : eta(eta_), per_objective_range(std::move(range)) {
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw ConfigError("noise eta must be finite and >= 0");
  for (double r : per_objective_range) {
    if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("noise range components must be > 0");
  }
}

const PreferenceVector& sample_preference(const PreferenceSpace& space, Rng& rng) {
  return space.points()[rng.below(space.size())];
}

const PreferenceVector& sample_preference(const PreferenceSpace& space, std::uint64_t seed) {
  Rng rng(seed);
  return sample_preference(space, rng);
}

RewardVector sample_noise(const NoiseSpec& spec, Rng& rng) {
  RewardVector out(spec.per_objective_range.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double h = spec.half_width(i);
    // Draw even when h == 0 so the stream position does not depend on eta.
    const double u = rng.uniform(-1.0, 1.0);
    out[i] = h == 0.0 ? 0.0 : u * h;
  }
  return out;
}

RewardVector sample_noise(const NoiseSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  return sample_noise(spec, rng);
}

void to_json(nlohmann::json& j, const RewardVector& r) { j = r.data(); }

void from_json(const nlohmann::json& j, RewardVector& r) {
  if (!j.is_array()) throw ConfigError("reward vector must be a JSON array");
  r = RewardVector(j.get<std::vector<double>>());
}

void to_json(nlohmann::json& j, const PreferenceVector& w) { j = w.data(); }

PreferenceVector preference_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ConfigError("preference vector must be a JSON array");
  return PreferenceVector(j.get<std::vector<double>>());
}

}  // namespace dwpi
