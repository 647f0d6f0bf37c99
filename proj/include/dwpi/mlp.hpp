#ifndef DWPI_MLP_HPP
#define DWPI_MLP_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "dwpi/demos.hpp"
#include "dwpi/preference.hpp"

namespace dwpi {

enum class LossKind { SquaredL2, L2 };

std::string_view loss_name(LossKind k);
LossKind loss_from_name(std::string_view name);

struct FitConfig {
  std::size_t batch_size = 32;
  double learning_rate = 1e-2;
  std::size_t max_epochs = 500;
  std::size_t patience = 50;
  LossKind loss_kind = LossKind::SquaredL2;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const FitConfig& c);
void from_json(const nlohmann::json& j, FitConfig& c);

// Fully connected ReLU network with a softmax head. Parameters live in one flat
// vector: for each layer, the row-major weight matrix (out x in) then the bias.
class MlpModel {
 public:
  MlpModel(std::vector<std::size_t> layer_sizes, FeatureStats normalizer, PreferenceSpace space,
           std::vector<double> params);

  // He-uniform weights, zero biases.
  static MlpModel initialized(std::vector<std::size_t> layer_sizes, FeatureStats normalizer,
                              PreferenceSpace space, std::uint64_t seed);
  static MlpModel zeros(std::vector<std::size_t> layer_sizes, FeatureStats normalizer, PreferenceSpace space);

  [[nodiscard]] const std::vector<std::size_t>& layer_sizes() const noexcept { return sizes_; }
  [[nodiscard]] const FeatureStats& normalizer() const noexcept { return norm_; }
  [[nodiscard]] const PreferenceSpace& space() const noexcept { return space_; }
  [[nodiscard]] std::span<const double> params() const noexcept { return params_; }
  [[nodiscard]] std::size_t param_count() const noexcept { return params_.size(); }
  [[nodiscard]] std::size_t objectives() const noexcept { return sizes_.front(); }

  [[nodiscard]] MlpModel with_params(std::vector<double> params) const;

  bool operator==(const MlpModel& o) const {
    return sizes_ == o.sizes_ && norm_.mean == o.norm_.mean && norm_.stddev == o.norm_.stddev &&
           space_ == o.space_ && params_ == o.params_;
  }

 private:
  std::vector<std::size_t> sizes_;
  FeatureStats norm_;
  PreferenceSpace space_;
  std::vector<double> params_;
};

std::size_t parameter_count(std::span<const std::size_t> layer_sizes);

// m -> hidden... -> m, normalizer from the train split of `ds`.
MlpModel make_model(const DemoSet& ds, std::span<const std::size_t> hidden, std::uint64_t seed);

PreferenceVector forward(const MlpModel& model, const ReturnSummary& f);

double loss(const MlpModel& model, std::span<const Demonstration> batch, LossKind kind = LossKind::SquaredL2);
// Gradient of loss() with respect to params(), same layout.
std::vector<double> backward(const MlpModel& model, std::span<const Demonstration> batch,
                             LossKind kind = LossKind::SquaredL2);

struct EpochRecord {
  std::size_t epoch;  // 1-based
  double train_loss;
  double validation_loss;
};

struct FitResult {
  MlpModel model;  // best-validation snapshot
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 0: the initial model was never beaten
  double best_validation_loss = 0.0;
};

FitResult fit(const MlpModel& initial, const DemoSet& ds, const FitConfig& cfg);

struct Inference {
  PreferenceVector raw;
  PreferenceVector snapped;
  std::size_t lattice_index;
};

Inference infer(const MlpModel& model, const ReturnSummary& f);

struct ModelMeta {
  std::uint64_t spec_hash = 0;
  std::uint64_t demos_hash = 0;
  std::uint64_t config_hash = 0;
  nlohmann::json training;  // free-form sidecar content: fit config, history
};

// Writes `path` (binary) and `path`.json (sidecar).
void save_model(const std::filesystem::path& path, const MlpModel& model, const ModelMeta& meta);

struct LoadedModel {
  MlpModel model;
  ModelMeta meta;
};

LoadedModel load_model(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& path);

}  // namespace dwpi

#endif  // DWPI_MLP_HPP
