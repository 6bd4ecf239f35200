#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gaitwave/csi_data.hpp"
#include "gaitwave/models.hpp"
#include "gaitwave/train.hpp"
#include "json.hpp"

namespace gaitwave {

enum class BandSetting { sub6_10hz, sub6_200hz, mmwave_10hz };

inline constexpr BandSetting kAllBandSettings[] = {BandSetting::sub6_10hz, BandSetting::sub6_200hz,
                                                   BandSetting::mmwave_10hz};

std::string to_string(BandSetting b);
BandSetting band_setting_from_string(const std::string& s);
Band source_band(BandSetting b);
double target_rate(BandSetting b);

struct BandOptions {
  double window_seconds = 5.0;
  bool background_subtraction = false;
  std::array<double, 3> split_ratios{0.7, 0.15, 0.15};
  uint64_t split_seed = 0;
};

// Windows of one band setting, ready for training.
struct BandData {
  std::vector<Window> windows;
  SplitAssignment split;
  int64_t channels = 0;
  int64_t window_length = 0;
  int num_classes = 0;
};

// Decimates to the setting's rate, segments, optionally subtracts the band's
// background profile (mean over its background recordings) and splits.
// Throws ConfigError when subtraction is requested without a background.
BandData prepare_band(const LoadedBand& raw, BandSetting setting, int num_classes, const BandOptions& opt,
                      Diagnostics* diag = nullptr);

// a is significantly better than b when a.mean - a.std > b.mean + b.std.
bool significantly_better(const AccuracyStat& a, const AccuracyStat& b);

struct BandResult {
  AccuracyStat stat;
  std::vector<RunRecord> runs;
};

struct ComparisonRow {
  ModelConfig config;  // as listed; channels and classes are filled per band
  int64_t params = 0;
  std::map<BandSetting, BandResult> bands;  // absent bands are missing keys

  std::optional<BandSetting> flagged() const;
  bool complete() const { return bands.size() == 3; }
};

// Bold-equivalent flag: mmwave_10hz when its mean is strictly higher than
// sub6_10hz, else sub6_10hz; the present one when only one of the two exists.
std::optional<BandSetting> flag_band(const std::map<BandSetting, BandResult>& bands);

// Model config specialised to a band's data shape.
ModelConfig bind_config(const ModelConfig& cfg, const BandData& data);

// Parameter count reported for a row: measured for the sub6_10hz input shape
// when present, otherwise for the first band run.
int64_t row_params(const ModelConfig& cfg, const std::map<BandSetting, BandData>& data);

// Every (config, band) pair through repeat_runs, serially.
std::vector<ComparisonRow> run_comparison(const std::vector<ModelConfig>& configs,
                                          const std::map<BandSetting, BandData>& data,
                                          const TrainSettings& settings);

enum class Scope { all, excl_lstm_humanfi, excl_all_lstm };
std::string to_string(Scope s);

struct AggregateSummary {
  Scope scope = Scope::all;
  int total = 0;    // complete rows in scope
  int skipped = 0;  // rows in scope lacking one of the three bands
  std::map<BandSetting, double> avg_accuracy;
  int count_better_than_low = 0;   // mmwave mean > sub6_10hz mean
  int count_better_than_high = 0;  // mmwave mean > sub6_200hz mean
  int count_sig_better_low = 0;
  int count_sig_better_high = 0;
};

AggregateSummary aggregate(const std::vector<ComparisonRow>& rows, Scope scope);

struct CurvePoint {
  double fraction = 0.0;
  int64_t train_windows = 0;
  AccuracyStat stat;
  std::vector<RunRecord> runs;
};

inline const std::vector<double> kDefaultFractions{0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1};

// Training indices kept at `fraction` of the whole dataset (the training split
// itself corresponds to its ratio, 0.7 by default). Per class, a seeded
// permutation of that class's training windows is cut to
// floor(n * fraction / ratio), so smaller fractions are subsets of larger
// ones. Throws ParameterError naming a class left without windows.
std::vector<int64_t> subsample_train(const std::vector<Window>& windows, const SplitAssignment& split,
                                     double fraction, uint64_t seed);

// Validation and test splits stay fixed at every fraction.
std::vector<CurvePoint> learning_curve(const ModelConfig& cfg, const BandData& data,
                                       const std::vector<double>& fractions, const TrainSettings& settings);

// Report artifacts.
std::string comparison_csv(const std::vector<ComparisonRow>& rows);
std::string comparison_markdown(const std::vector<ComparisonRow>& rows);
nlohmann::json aggregate_json(const std::vector<AggregateSummary>& summaries);
std::string aggregate_markdown(const std::vector<AggregateSummary>& summaries);
std::string learning_curve_csv(const std::vector<CurvePoint>& points);

nlohmann::json rows_to_json(const std::vector<ComparisonRow>& rows);
std::vector<ComparisonRow> rows_from_json(const nlohmann::json& j);
nlohmann::json curve_to_json(const std::vector<CurvePoint>& points);
std::vector<CurvePoint> curve_from_json(const nlohmann::json& j);

}  // namespace gaitwave
