#ifndef DWPI_PREFERENCE_HPP
#define DWPI_PREFERENCE_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "dwpi/rng.hpp"

namespace dwpi {

// Per-objective reward or return vector, in environment units.
class RewardVector {
 public:
  RewardVector() = default;
  explicit RewardVector(std::size_t m, double fill = 0.0) : values_(m, fill) {}
  explicit RewardVector(std::vector<double> values) : values_(std::move(values)) {}
  RewardVector(std::initializer_list<double> values) : values_(values) {}

  [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
  [[nodiscard]] const std::vector<double>& data() const noexcept { return values_; }

  RewardVector& operator+=(const RewardVector& other);
  RewardVector& operator*=(double s);
  friend RewardVector operator+(RewardVector a, const RewardVector& b) { return a += b; }
  friend RewardVector operator*(double s, RewardVector a) { return a *= s; }

  bool operator==(const RewardVector&) const = default;
  // Lexicographic order, used for deterministic tie-breaking.
  auto operator<=>(const RewardVector& other) const { return values_ <=> other.values_; }

  [[nodiscard]] bool all_finite() const;

 private:
  std::vector<double> values_;
};

// Undiscounted per-objective episode return; the reward trajectory fed to inference.
using ReturnSummary = RewardVector;

// A point on the probability simplex with m >= 2 components.
class PreferenceVector {
 public:
  static constexpr double kSumTolerance = 1e-9;

  // Rejects negative components and sums farther than kSumTolerance from 1.
  // Drift within tolerance is renormalized away.
  explicit PreferenceVector(std::vector<double> weights);
  PreferenceVector(std::initializer_list<double> weights)
      : PreferenceVector(std::vector<double>(weights)) {}

  // Clips negatives to zero and rescales to unit sum. Throws when nothing positive remains.
  static PreferenceVector normalized(std::span<const double> raw);
  static PreferenceVector uniform(std::size_t m);

  [[nodiscard]] std::size_t size() const noexcept { return weights_.size(); }
  double operator[](std::size_t i) const { return weights_[i]; }
  [[nodiscard]] std::span<const double> weights() const noexcept { return weights_; }
  [[nodiscard]] const std::vector<double>& data() const noexcept { return weights_; }

  bool operator==(const PreferenceVector&) const = default;

 private:
  std::vector<double> weights_;
};

double scalarize(const PreferenceVector& w, const RewardVector& r);
double scalarize(std::span<const double> w, std::span<const double> r);

double squared_distance(std::span<const double> a, std::span<const double> b);

// Simplex lattice with components in {0, step, 2 step, ..., 1}, enumerated in
// ascending lexicographic order of the component vector.
class PreferenceSpace {
 public:
  PreferenceSpace(std::size_t m, double grid_step);

  [[nodiscard]] std::size_t objectives() const noexcept { return m_; }
  [[nodiscard]] double grid_step() const noexcept { return grid_step_; }
  [[nodiscard]] std::size_t divisions() const noexcept { return divisions_; }
  [[nodiscard]] std::size_t size() const noexcept { return points_.size(); }
  [[nodiscard]] const std::vector<PreferenceVector>& points() const noexcept { return points_; }
  const PreferenceVector& operator[](std::size_t i) const { return points_.at(i); }

  // Euclidean nearest lattice point. Ties go to the lowest index.
  [[nodiscard]] std::size_t nearest_index(std::span<const double> w) const;
  [[nodiscard]] const PreferenceVector& snap(const PreferenceVector& w) const {
    return points_[nearest_index(w.weights())];
  }

  [[nodiscard]] nlohmann::json descriptor() const;
  static PreferenceSpace from_descriptor(const nlohmann::json& j);

  bool operator==(const PreferenceSpace& other) const {
    return m_ == other.m_ && divisions_ == other.divisions_;
  }

 private:
  std::size_t m_;
  double grid_step_;
  std::size_t divisions_;
  std::vector<PreferenceVector> points_;
};

PreferenceSpace enumerate_simplex(std::size_t m, double grid_step);

// Binomial count of lattice points, C(divisions + m - 1, m - 1).
std::uint64_t simplex_lattice_size(std::size_t m, std::size_t divisions);

// Additive uniform noise; component i is drawn from [-eta * range_i, +eta * range_i].
struct NoiseSpec {
  double eta = 0.0;
  std::vector<double> per_objective_range;

  NoiseSpec() = default;
  NoiseSpec(double eta, std::vector<double> range);

  [[nodiscard]] double half_width(std::size_t i) const { return eta * per_objective_range[i]; }
};

const PreferenceVector& sample_preference(const PreferenceSpace& space, Rng& rng);
const PreferenceVector& sample_preference(const PreferenceSpace& space, std::uint64_t seed);
RewardVector sample_noise(const NoiseSpec& spec, Rng& rng);
RewardVector sample_noise(const NoiseSpec& spec, std::uint64_t seed);

void to_json(nlohmann::json& j, const RewardVector& r);
void from_json(const nlohmann::json& j, RewardVector& r);
void to_json(nlohmann::json& j, const PreferenceVector& w);
PreferenceVector preference_from_json(const nlohmann::json& j);

}  // namespace dwpi

template <>
struct nlohmann::adl_serializer<dwpi::PreferenceVector> {
  static dwpi::PreferenceVector from_json(const json& j) { return dwpi::preference_from_json(j); }
  static void to_json(json& j, const dwpi::PreferenceVector& w) { dwpi::to_json(j, w); }
};

#endif  // DWPI_PREFERENCE_HPP
