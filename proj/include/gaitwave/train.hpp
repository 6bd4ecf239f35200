#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gaitwave/csi_data.hpp"
#include "gaitwave/errors.hpp"
#include "gaitwave/models.hpp"
#include "gaitwave/preprocess.hpp"
#include "json.hpp"

namespace gaitwave {

struct TrainSettings {
  int epochs = 100;
  int batch_size = 32;
  double learning_rate = 1e-3;
  std::string optimizer = "adam";
  int early_stop_patience = 15;
  uint64_t seed = 0;
  int repeats = 3;

  // Smoothing and mixup are applied to a model only when its config asks for them.
  SmoothingParams smoothing;
  MixupParams mixup;
  bool standardize = true;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainSettings& s);
// Strict: unknown keys raise ConfigError. Augmentation parameters are not read here.
void from_json(const nlohmann::json& j, TrainSettings& s);

struct RunRecord {
  uint64_t seed = 0;
  double best_val_accuracy = 0.0;
  double test_accuracy = 0.0;
  int epoch_of_best = 0;  // 1-based
  std::vector<double> loss_history;
};

struct AccuracyStat {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  int n = 0;

  static AccuracyStat from_runs(const std::vector<double>& accuracies);
};

void to_json(nlohmann::json& j, const RunRecord& r);
void from_json(const nlohmann::json& j, RunRecord& r);
void to_json(nlohmann::json& j, const AccuracyStat& s);
void from_json(const nlohmann::json& j, AccuracyStat& s);

struct TrainResult {
  std::unique_ptr<Model> model;  // restored to the best-validation checkpoint
  RunRecord record;
  std::optional<ChannelStats> input_stats;  // set when standardization is on
};

// Trains cfg on split.train, selects the epoch with the best validation
// accuracy (the last epoch when the validation split is empty) and evaluates
// it once on split.test. Only training windows feed gradients, augmentation
// and standardization statistics. Throws TrainingFailure on a non-finite loss.
TrainResult train(const ModelConfig& cfg, const std::vector<Window>& windows, const SplitAssignment& split,
                  const TrainSettings& settings);

struct TrainingBatch {
  nn::Tensor x;  // [B, L, C]
  nn::Tensor y;  // [B, K], soft when mixed
};
// One training batch: per-window smoothing (when cfg.smoothing), then
// standardization, then mixup across the batch (when cfg.mixup).
TrainingBatch make_training_batch(const std::vector<const Window*>& batch, const ModelConfig& cfg,
                                  const TrainSettings& settings, const ChannelStats* stats, std::mt19937_64& rng);

// Fraction of windows whose argmax logit (lowest index on ties) equals the
// label. Windows are standardized first when stats are given. Throws
// MisuseError for an empty set.
double evaluate(Model& m, const std::vector<const Window*>& windows, const ChannelStats* stats = nullptr);
double evaluate(Model& m, const std::vector<Window>& windows, const ChannelStats* stats = nullptr);

// Index of the largest value, lowest index on ties.
int64_t argmax(std::span<const double> row);

// Runs train with seeds settings.seed + 0 .. + repeats-1.
struct RepeatResult {
  AccuracyStat stat;
  std::vector<RunRecord> runs;
};
RepeatResult repeat_runs(const ModelConfig& cfg, const std::vector<Window>& windows, const SplitAssignment& split,
                         const TrainSettings& settings);

// Thrown by repeat_runs when one of the runs fails; carries the runs that finished.
class RepeatFailure : public TrainingFailure {
 public:
  RepeatFailure(const TrainingFailure& cause, std::vector<RunRecord> completed)
      : TrainingFailure(cause), completed_(std::move(completed)) {}
  const std::vector<RunRecord>& completed() const { return completed_; }

 private:
  std::vector<RunRecord> completed_;
};

}  // namespace gaitwave
