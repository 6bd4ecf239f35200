#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gaitwave/experiments.hpp"
#include "gaitwave/train.hpp"
#include "gaitwave/synthgen.hpp"
#include "json.hpp"

namespace gaitwave {

// Where one band's recordings come from: a manifest on disk or a synthetic spec.
struct DataSource {
  std::optional<std::filesystem::path> manifest;  // resolved against the config's directory
  std::string manifest_ref;                        // the path as written in the config
  std::optional<SynthSpec> synth;

  // Number of classes declared by the manifest or the spec.
  int num_classes() const;
  LoadedBand load(Band band, Diagnostics* diag = nullptr) const;
};

struct BandEntry {
  BandSetting band = BandSetting::sub6_10hz;
  bool background_subtraction = false;
};

struct LearningCurveConfig {
  ModelConfig model;
  BandSetting band = BandSetting::mmwave_10hz;
  std::vector<double> fractions = kDefaultFractions;
};

struct ExperimentConfig {
  std::filesystem::path output_dir = "results";
  double window_seconds = 5.0;
  std::map<Band, DataSource> data;
  std::vector<BandEntry> bands;
  std::vector<ModelConfig> models;
  TrainSettings train;  // includes smoothing, mixup and standardization
  std::array<double, 3> split_ratios{0.7, 0.15, 0.15};
  uint64_t split_seed = 0;
  std::optional<LearningCurveConfig> learning_curve;

  // Canonical JSON of everything that influences results except the output directory.
  nlohmann::json fingerprint() const;
};

// Parses and validates; relative paths resolve against `base_dir`. Throws
// ConfigError for unknown keys, invalid values, missing manifests, a band
// without a data source, sources disagreeing on the class count, or an empty
// model list. GAITWAVE_OUT, when set, replaces output_dir.
ExperimentConfig parse_experiment_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// 64-bit FNV-1a, used for job identities.
uint64_t fnv1a64(std::string_view bytes);

}  // namespace gaitwave
