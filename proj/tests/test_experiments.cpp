#include <algorithm>
#include <random>
#include <set>

#include "doctest.h"
#include "gaitwave/errors.hpp"
#include "gaitwave/experiments.hpp"
#include "gaitwave/synthgen.hpp"
#include "toy_models.hpp"

using namespace gaitwave;
using gaitwave::testing::toy_config;

namespace {

BandResult stat(double mean, double std) { return {{mean, std, 3}, {}}; }

ComparisonRow row(Family f, BandResult low, BandResult high, BandResult mm) {
  ComparisonRow r;
  r.config.family = f;
  r.bands[BandSetting::sub6_10hz] = low;
  r.bands[BandSetting::sub6_200hz] = high;
  r.bands[BandSetting::mmwave_10hz] = mm;
  return r;
}

// Six rows whose orderings were tallied by hand (see the expectations below).
std::vector<ComparisonRow> hand_rows() {
  return {
      row(Family::lstm_humanfi, stat(0.80, 0.01), stat(0.85, 0.01), stat(0.90, 0.01)),
      row(Family::lstm_humanfi, stat(0.90, 0.02), stat(0.88, 0.02), stat(0.85, 0.02)),
      row(Family::cnn_bilstm_temporal_attn, stat(0.70, 0.05), stat(0.75, 0.05), stat(0.78, 0.05)),
      row(Family::tcn, stat(0.91, 0.017), stat(0.95, 0.01), stat(0.963, 0.006)),
      row(Family::custom_resnet1d, stat(0.80, 0.05), stat(0.82, 0.01), stat(0.90, 0.05)),
      row(Family::opt_eca_resnet1d_jaril, stat(0.60, 0.0), stat(0.70, 0.0), stat(0.60, 0.0)),
  };
}

BandData synthetic_band(double noise, uint64_t seed, int classes = 3) {
  SynthSpec s;
  s.num_classes = classes;
  s.sessions_per_class = 1;
  s.duration_s = 60;
  s.channels = 4;
  s.noise_std = noise;
  s.seed = seed;
  const auto ds = synthesize(s);
  LoadedBand raw{ds.labelled, {ds.background}};
  BandOptions opt;
  opt.background_subtraction = true;
  opt.split_seed = 1;
  return prepare_band(raw, BandSetting::mmwave_10hz, classes, opt);
}

TrainSettings fast_settings() {
  TrainSettings s;
  s.epochs = 15;
  s.batch_size = 8;
  s.learning_rate = 1e-2;
  s.repeats = 2;
  return s;
}

}  // namespace

TEST_CASE("significance rule") {
  CHECK(significantly_better({0.963, 0.006, 3}, {0.91, 0.017, 3}));
  CHECK_FALSE(significantly_better({0.9, 0.05, 3}, {0.8, 0.05, 3}));
  CHECK_FALSE(significantly_better({0.9, 0.01, 3}, {0.9, 0.01, 3}));

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0), s(0.0, 0.1);
  for (int i = 0; i < 10000; ++i) {
    AccuracyStat a{u(rng), s(rng), 3}, b{u(rng), s(rng), 3};
    if (significantly_better(a, b)) REQUIRE(a.mean > b.mean);
  }
}

TEST_CASE("band flag follows the higher low-rate mean") {
  auto r = row(Family::tcn, stat(0.8, 0.0), stat(0.99, 0.0), stat(0.9, 0.0));
  CHECK(r.flagged() == BandSetting::mmwave_10hz);
  r.bands[BandSetting::mmwave_10hz] = stat(0.7, 0.0);
  CHECK(r.flagged() == BandSetting::sub6_10hz);
  r.bands[BandSetting::mmwave_10hz] = stat(0.8, 0.0);
  CHECK(r.flagged() == BandSetting::sub6_10hz);
  r.bands.erase(BandSetting::sub6_10hz);
  CHECK(r.flagged() == BandSetting::mmwave_10hz);
  for (const auto& hr : hand_rows()) {
    const auto f = *hr.flagged();
    const double other = hr.bands.at(f == BandSetting::mmwave_10hz ? BandSetting::sub6_10hz : BandSetting::mmwave_10hz).stat.mean;
    CHECK(hr.bands.at(f).stat.mean >= other);
  }
}

TEST_CASE("aggregation over the hand-built rows") {
  const auto rows = hand_rows();
  auto all = aggregate(rows, Scope::all);
  CHECK(all.total == 6);
  CHECK(all.count_better_than_low == 4);
  CHECK(all.count_better_than_high == 4);
  CHECK(all.count_sig_better_low == 2);
  CHECK(all.count_sig_better_high == 2);
  CHECK(all.avg_accuracy[BandSetting::mmwave_10hz] == doctest::Approx(4.993 / 6));

  auto no_humanfi = aggregate(rows, Scope::excl_lstm_humanfi);
  CHECK(no_humanfi.total == 4);
  CHECK(no_humanfi.count_better_than_low == 3);
  CHECK(no_humanfi.count_better_than_high == 3);
  CHECK(no_humanfi.count_sig_better_low == 1);
  CHECK(no_humanfi.count_sig_better_high == 1);

  auto no_lstm = aggregate(rows, Scope::excl_all_lstm);
  CHECK(no_lstm.total == 3);
  CHECK(no_lstm.count_better_than_low == 2);
  CHECK(no_lstm.count_better_than_high == 2);
  CHECK(no_lstm.count_sig_better_low == 1);
  CHECK(no_lstm.count_sig_better_high == 1);

  auto shuffled = rows;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto s = aggregate(shuffled, Scope::all);
    REQUIRE(s.count_sig_better_low == all.count_sig_better_low);
    REQUIRE(s.avg_accuracy[BandSetting::sub6_10hz] == doctest::Approx(all.avg_accuracy[BandSetting::sub6_10hz]));
  }

  auto identical = row(Family::tcn, stat(0.9, 0.01), stat(0.9, 0.01), stat(0.9, 0.01));
  auto zero = aggregate({identical, identical}, Scope::all);
  CHECK(zero.count_better_than_low + zero.count_better_than_high + zero.count_sig_better_low +
            zero.count_sig_better_high == 0);

  auto partial = rows;
  partial[3].bands.erase(BandSetting::sub6_200hz);
  auto p = aggregate(partial, Scope::all);
  CHECK(p.total == 5);
  CHECK(p.skipped == 1);
}

TEST_CASE("scope sizes for a full-size result set") {
  std::vector<ComparisonRow> rows;
  auto add = [&](Family f, int n) {
    for (int i = 0; i < n; ++i) rows.push_back(row(f, stat(0.8, 0.01), stat(0.8, 0.01), stat(0.9, 0.01)));
  };
  add(Family::lstm_humanfi, 64);
  add(Family::cnn_bilstm_temporal_attn, 16);
  add(Family::cnn_bilstm_dual_attn, 16);
  add(Family::tcn, 16);
  add(Family::custom_resnet1d, 12);
  add(Family::custom_eca_resnet1d, 12);
  add(Family::opt_resnet1d_jaril, 12);
  add(Family::opt_eca_resnet1d_jaril, 12);
  CHECK(aggregate(rows, Scope::all).total == 160);
  CHECK(aggregate(rows, Scope::excl_lstm_humanfi).total == 96);
  CHECK(aggregate(rows, Scope::excl_all_lstm).total == 64);
}

TEST_CASE("learning-curve subsets are nested and stratified") {
  std::vector<Window> windows;
  for (int k = 0; k < 4; ++k)
    for (int i = 0; i < 40; ++i) {
      Window w;
      w.label = k;
      windows.push_back(w);
    }
  auto split = make_splits(windows, {0.7, 0.15, 0.15}, 9);
  auto full = subsample_train(windows, split, 0.7, 3);
  CHECK(full == split.train);
  std::vector<int64_t> prev = full;
  for (double f : {0.6, 0.5, 0.4, 0.3, 0.2, 0.1}) {
    auto sub = subsample_train(windows, split, f, 3);
    CHECK(std::includes(prev.begin(), prev.end(), sub.begin(), sub.end()));
    std::map<int, int> per_class;
    for (int64_t i : sub) ++per_class[windows[static_cast<size_t>(i)].label];
    for (const auto& [k, n] : per_class) CHECK(n == static_cast<int>(std::floor(28 * f / 0.7 + 1e-9)));
    prev = sub;
  }
  CHECK(subsample_train(windows, split, 0.3, 3) == subsample_train(windows, split, 0.3, 3));
  CHECK_THROWS_AS(subsample_train(windows, split, 0.8, 3), ParameterError);
  CHECK_THROWS_AS(subsample_train(windows, split, 0.01, 3), ParameterError);
  try {
    subsample_train(windows, split, 0.02, 3);
  } catch (const ParameterError& e) {
    CHECK(std::string(e.what()).find("class 0") != std::string::npos);
  }
}

TEST_CASE("band preparation") {
  SynthSpec s;
  s.rate_hz = 200;
  s.channels = 52;
  s.band = Band::sub6;
  s.duration_s = 30;
  s.sessions_per_class = 1;
  const auto ds = synthesize(s);
  LoadedBand raw{ds.labelled, {ds.background}};
  BandOptions opt;
  auto low = prepare_band(raw, BandSetting::sub6_10hz, 5, opt);
  CHECK(low.window_length == 50);
  CHECK(low.windows.size() == 5 * 6);
  auto high = prepare_band(raw, BandSetting::sub6_200hz, 5, opt);
  CHECK(high.window_length == 1000);
  CHECK(high.windows.size() == low.windows.size());

  opt.background_subtraction = true;
  auto sub = prepare_band(raw, BandSetting::sub6_10hz, 5, opt);
  double mean = 0;
  for (const auto& w : sub.windows)
    for (double v : w.samples.values()) mean += v;
  mean /= static_cast<double>(sub.windows.size() * 50 * 52);
  CHECK(std::abs(mean) < 0.05);
  raw.background.clear();
  CHECK_THROWS_AS(prepare_band(raw, BandSetting::sub6_10hz, 5, opt), ConfigError);
}

TEST_CASE("comparison rows, report round trip and learning curve on toy data") {
  std::map<BandSetting, BandData> data;
  data[BandSetting::sub6_10hz] = synthetic_band(0.1, 1);
  data[BandSetting::sub6_200hz] = synthetic_band(0.1, 2);
  data[BandSetting::mmwave_10hz] = synthetic_band(0.1, 3);
  ModelConfig a = toy_config(Family::tcn), b = toy_config(Family::lstm_humanfi);
  auto settings = fast_settings();
  auto rows = run_comparison({a, b}, data, settings);
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    CHECK(r.complete());
    for (const auto& [band, res] : r.bands) {
      CHECK(res.stat.n == 2);
      CHECK(res.runs.size() == 2);
    }
  }
  CHECK(rows[0].params == count_params(*build_model(bind_config(a, data[BandSetting::sub6_10hz]))));

  const auto j = rows_to_json(rows);
  const auto back = rows_from_json(j);
  CHECK(rows_to_json(back) == j);
  CHECK(comparison_csv(back) == comparison_csv(rows));
  CHECK(comparison_markdown(rows).find("| tcn |") != std::string::npos);
  const auto csv = comparison_csv(rows);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

  std::vector<AggregateSummary> sums{aggregate(rows, Scope::all), aggregate(rows, Scope::excl_all_lstm)};
  CHECK(aggregate_json(sums)[1]["total"] == 1);
  CHECK(aggregate_markdown(sums).find("all (2)") != std::string::npos);

  settings.repeats = 1;
  auto curve = learning_curve(a, data[BandSetting::mmwave_10hz], kDefaultFractions, settings);
  REQUIRE(curve.size() == 7);
  CHECK(curve.front().train_windows == static_cast<int64_t>(data[BandSetting::mmwave_10hz].split.train.size()));
  for (size_t i = 1; i < curve.size(); ++i) CHECK(curve[i].train_windows <= curve[i - 1].train_windows);
  CHECK(curve_from_json(curve_to_json(curve)).size() == 7);
  CHECK(learning_curve_csv(curve).rfind("0.10,", std::string::npos) != std::string::npos);

  // The top fraction trains on the full split, reproducing the comparison run for the same seed.
  auto s1 = settings;
  const auto& mm = data[BandSetting::mmwave_10hz];
  CHECK(curve.front().runs[0].loss_history ==
        train(bind_config(a, mm), mm.windows, mm.split, s1).record.loss_history);
}

TEST_CASE("a noisier band scores lower") {
  std::map<BandSetting, BandData> data;
  data[BandSetting::sub6_10hz] = synthetic_band(0.1, 4);
  data[BandSetting::mmwave_10hz] = synthetic_band(4.0, 4);
  auto settings = fast_settings();
  settings.epochs = 25;
  auto rows = run_comparison({toy_config(Family::tcn)}, data, settings);
  const auto& r = rows[0];
  CHECK(r.bands.at(BandSetting::sub6_10hz).stat.mean > r.bands.at(BandSetting::mmwave_10hz).stat.mean);
  CHECK(r.flagged() == BandSetting::sub6_10hz);
  CHECK_FALSE(r.complete());
}
