#include "gaitwave/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "gaitwave/errors.hpp"
#include "gaitwave/preprocess.hpp"

namespace gaitwave {

using nlohmann::json;

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string human_count(int64_t n) {
  if (n >= 1'000'000) return fixed(static_cast<double>(n) / 1e6, 2) + "M";
  if (n >= 1'000) return fixed(static_cast<double>(n) / 1e3, 1) + "K";
  return std::to_string(n);
}

std::string band_header(BandSetting b) {
  switch (b) {
    case BandSetting::sub6_10hz:
      return "5 GHz @10Hz";
    case BandSetting::sub6_200hz:
      return "5 GHz @200Hz";
    case BandSetting::mmwave_10hz:
      return "60 GHz @10Hz";
  }
  return "";
}

bool in_scope(Family f, Scope s) {
  switch (s) {
    case Scope::all:
      return true;
    case Scope::excl_lstm_humanfi:
      return f != Family::lstm_humanfi;
    case Scope::excl_all_lstm:
      return !is_lstm_based(f);
  }
  return true;
}

CsiRecording at_rate(const CsiRecording& rec, double rate) {
  if (rec.rate_hz == rate) return rec;
  return downsample(rec, rate);
}

}  // namespace

std::string to_string(BandSetting b) {
  switch (b) {
    case BandSetting::sub6_10hz:
      return "sub6_10hz";
    case BandSetting::sub6_200hz:
      return "sub6_200hz";
    case BandSetting::mmwave_10hz:
      return "mmwave_10hz";
  }
  return "";
}

BandSetting band_setting_from_string(const std::string& s) {
  for (BandSetting b : kAllBandSettings) {
    if (to_string(b) == s) return b;
  }
  throw ConfigError("unknown band setting '" + s + "'");
}

Band source_band(BandSetting b) { return b == BandSetting::mmwave_10hz ? Band::mmwave : Band::sub6; }

double target_rate(BandSetting b) { return b == BandSetting::sub6_200hz ? 200.0 : 10.0; }

BandData prepare_band(const LoadedBand& raw, BandSetting setting, int num_classes, const BandOptions& opt,
                      Diagnostics* diag) {
  if (raw.labelled.empty()) throw ConfigError("no labelled recordings for band " + to_string(setting));
  const double rate = target_rate(setting);
  BandData out;
  out.num_classes = num_classes;
  for (const auto& rec : raw.labelled) {
    auto windows = segment(at_rate(rec, rate), opt.window_seconds, diag);
    for (auto& w : windows) out.windows.push_back(std::move(w));
  }
  if (out.windows.empty()) throw ConfigError("band " + to_string(setting) + " yields no windows");
  out.channels = out.windows.front().samples.cols();
  out.window_length = out.windows.front().samples.rows();
  for (const auto& w : out.windows) {
    if (w.samples.cols() != out.channels) throw DimensionError("recordings of one band disagree on channel count");
  }

  if (opt.background_subtraction) {
    if (raw.background.empty())
      throw ConfigError("background subtraction requested but band " + to_string(setting) + " has no background");
    BackgroundProfile profile;
    profile.band = source_band(setting);
    profile.mean_amplitude.assign(static_cast<size_t>(out.channels), 0.0);
    for (const auto& bg : raw.background) {
      const auto p = compute_background(at_rate(bg, rate));
      if (p.mean_amplitude.size() != profile.mean_amplitude.size())
        throw DimensionError("background recording has the wrong channel count");
      for (size_t c = 0; c < p.mean_amplitude.size(); ++c) profile.mean_amplitude[c] += p.mean_amplitude[c];
      profile.source_session += (profile.source_session.empty() ? "" : ",") + p.source_session;
    }
    for (auto& v : profile.mean_amplitude) v /= static_cast<double>(raw.background.size());
    for (auto& w : out.windows) w = subtract_background(w, profile);
  }
  out.split = make_splits(out.windows, opt.split_ratios, opt.split_seed);
  return out;
}

bool significantly_better(const AccuracyStat& a, const AccuracyStat& b) { return a.mean - a.std > b.mean + b.std; }

std::optional<BandSetting> flag_band(const std::map<BandSetting, BandResult>& bands) {
  const auto low = bands.find(BandSetting::sub6_10hz);
  const auto mm = bands.find(BandSetting::mmwave_10hz);
  if (low == bands.end() && mm == bands.end()) return std::nullopt;
  if (low == bands.end()) return BandSetting::mmwave_10hz;
  if (mm == bands.end()) return BandSetting::sub6_10hz;
  return mm->second.stat.mean > low->second.stat.mean ? BandSetting::mmwave_10hz : BandSetting::sub6_10hz;
}

std::optional<BandSetting> ComparisonRow::flagged() const { return flag_band(bands); }

ModelConfig bind_config(const ModelConfig& cfg, const BandData& data) {
  ModelConfig c = cfg;
  c.input_channels = data.channels;
  c.num_classes = data.num_classes;
  c.input_length = data.window_length;
  return c;
}

int64_t row_params(const ModelConfig& cfg, const std::map<BandSetting, BandData>& data) {
  if (data.empty()) return count_params(*build_model(cfg));
  auto it = data.find(BandSetting::sub6_10hz);
  const BandData& d = it != data.end() ? it->second : data.begin()->second;
  return count_params(*build_model(bind_config(cfg, d)));
}

std::vector<ComparisonRow> run_comparison(const std::vector<ModelConfig>& configs,
                                          const std::map<BandSetting, BandData>& data,
                                          const TrainSettings& settings) {
  std::vector<ComparisonRow> rows;
  for (const auto& cfg : configs) {
    ComparisonRow row;
    row.config = cfg;
    row.params = row_params(cfg, data);
    for (const auto& [band, d] : data) {
      auto r = repeat_runs(bind_config(cfg, d), d.windows, d.split, settings);
      row.bands[band] = {r.stat, std::move(r.runs)};
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string to_string(Scope s) {
  switch (s) {
    case Scope::all:
      return "all";
    case Scope::excl_lstm_humanfi:
      return "excl_lstm_humanfi";
    case Scope::excl_all_lstm:
      return "excl_all_lstm";
  }
  return "";
}

AggregateSummary aggregate(const std::vector<ComparisonRow>& rows, Scope scope) {
  AggregateSummary s;
  s.scope = scope;
  std::map<BandSetting, double> sums;
  for (const auto& row : rows) {
    if (!in_scope(row.config.family, scope)) continue;
    if (!row.complete()) {
      ++s.skipped;
      continue;
    }
    ++s.total;
    for (const auto& [band, r] : row.bands) sums[band] += r.stat.mean;
    const auto& mm = row.bands.at(BandSetting::mmwave_10hz).stat;
    const auto& low = row.bands.at(BandSetting::sub6_10hz).stat;
    const auto& high = row.bands.at(BandSetting::sub6_200hz).stat;
    s.count_better_than_low += mm.mean > low.mean;
    s.count_better_than_high += mm.mean > high.mean;
    s.count_sig_better_low += significantly_better(mm, low);
    s.count_sig_better_high += significantly_better(mm, high);
  }
  for (BandSetting b : kAllBandSettings) s.avg_accuracy[b] = s.total > 0 ? sums[b] / s.total : 0.0;
  return s;
}

std::vector<int64_t> subsample_train(const std::vector<Window>& windows, const SplitAssignment& split,
                                     double fraction, uint64_t seed) {
  const double full = split.ratios[0];
  if (!(fraction > 0.0) || fraction > full + 1e-9) {
    throw ParameterError("learning-curve fraction " + fixed(fraction, 3) + " outside (0, " + fixed(full, 3) + "]");
  }
  std::map<int, std::vector<int64_t>> by_class;
  for (int64_t i : split.train) by_class[windows[static_cast<size_t>(i)].label].push_back(i);
  std::vector<int64_t> kept;
  for (auto& [label, idx] : by_class) {
    // The permutation depends only on the seed and the class, which makes the subsets nested.
    std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), static_cast<uint32_t>(label)};
    std::mt19937_64 rng(seq);
    std::vector<int64_t> perm = idx;
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto count = static_cast<int64_t>(std::floor(static_cast<double>(idx.size()) * fraction / full + 1e-9));
    if (count < 1) {
      throw ParameterError("fraction " + fixed(fraction, 3) + " leaves class " + std::to_string(label) +
                           " without training windows");
    }
    kept.insert(kept.end(), perm.begin(), perm.begin() + std::min<int64_t>(count, static_cast<int64_t>(perm.size())));
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

std::vector<CurvePoint> learning_curve(const ModelConfig& cfg, const BandData& data,
                                       const std::vector<double>& fractions, const TrainSettings& settings) {
  std::vector<CurvePoint> out;
  const ModelConfig bound = bind_config(cfg, data);
  for (double f : fractions) {
    SplitAssignment sub = data.split;
    sub.train = subsample_train(data.windows, data.split, f, data.split.seed);
    auto r = repeat_runs(bound, data.windows, sub, settings);
    out.push_back({f, static_cast<int64_t>(sub.train.size()), r.stat, std::move(r.runs)});
  }
  return out;
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream os;
  os << "model,configuration,params";
  for (BandSetting b : kAllBandSettings) os << ',' << to_string(b) << "_mean," << to_string(b) << "_std," << to_string(b) << "_n";
  os << ",flag\n";
  for (const auto& row : rows) {
    os << to_string(row.config.family) << ",\"" << row.config.describe() << "\"," << row.params;
    for (BandSetting b : kAllBandSettings) {
      auto it = row.bands.find(b);
      if (it == row.bands.end()) {
        os << ",NA,NA,0";
      } else {
        os << ',' << fixed(it->second.stat.mean, 6) << ',' << fixed(it->second.stat.std, 6) << ','
           << it->second.stat.n;
      }
    }
    const auto flag = row.flagged();
    os << ',' << (flag ? to_string(*flag) : "") << '\n';
  }
  return os.str();
}

std::string comparison_markdown(const std::vector<ComparisonRow>& rows) {
  std::ostringstream os;
  os << "| Model | Configuration | #Params";
  for (BandSetting b : kAllBandSettings) os << " | " << band_header(b);
  os << " |\n|---|---|---:|---:|---:|---:|\n";
  for (const auto& row : rows) {
    const auto flag = row.flagged();
    os << "| " << to_string(row.config.family) << " | " << row.config.describe() << " | " << human_count(row.params);
    for (BandSetting b : kAllBandSettings) {
      auto it = row.bands.find(b);
      if (it == row.bands.end()) {
        os << " | n/a";
        continue;
      }
      const std::string cell = fixed(it->second.stat.mean, 3) + " ± " + fixed(it->second.stat.std, 3);
      os << " | " << (flag == b ? "**" + cell + "**" : cell);
    }
    os << " |\n";
  }
  return os.str();
}

json aggregate_json(const std::vector<AggregateSummary>& summaries) {
  json out = json::array();
  for (const auto& s : summaries) {
    json avg = json::object();
    for (const auto& [b, v] : s.avg_accuracy) avg[to_string(b)] = v;
    out.push_back({{"scope", to_string(s.scope)},
                   {"total", s.total},
                   {"skipped_incomplete", s.skipped},
                   {"avg_accuracy", avg},
                   {"mmwave_better_than_sub6_10hz", s.count_better_than_low},
                   {"mmwave_better_than_sub6_200hz", s.count_better_than_high},
                   {"mmwave_significantly_better_than_sub6_10hz", s.count_sig_better_low},
                   {"mmwave_significantly_better_than_sub6_200hz", s.count_sig_better_high}});
  }
  return out;
}

std::string aggregate_markdown(const std::vector<AggregateSummary>& summaries) {
  std::ostringstream os;
  os << "| Metric";
  for (const auto& s : summaries) os << " | " << to_string(s.scope) << " (" << s.total << ")";
  os << " |\n|---";
  for (size_t i = 0; i < summaries.size(); ++i) os << "|---:";
  os << "|\n";
  for (BandSetting b : kAllBandSettings) {
    os << "| Avg. accuracy (" << band_header(b) << ")";
    for (const auto& s : summaries) os << " | " << fixed(s.avg_accuracy.at(b), 3);
    os << " |\n";
  }
  auto line = [&](const std::string& label, auto field) {
    os << "| " << label;
    for (const auto& s : summaries) os << " | " << s.*field << "/" << s.total;
    os << " |\n";
  };
  line("60 GHz > 5 GHz @10Hz", &AggregateSummary::count_better_than_low);
  line("60 GHz > 5 GHz @200Hz", &AggregateSummary::count_better_than_high);
  line("60 GHz >> 5 GHz @10Hz (1 std)", &AggregateSummary::count_sig_better_low);
  line("60 GHz >> 5 GHz @200Hz (1 std)", &AggregateSummary::count_sig_better_high);
  return os.str();
}

std::string learning_curve_csv(const std::vector<CurvePoint>& points) {
  std::ostringstream os;
  os << "fraction,train_windows,mean,std,n\n";
  for (const auto& p : points) {
    os << fixed(p.fraction, 2) << ',' << p.train_windows << ',' << fixed(p.stat.mean, 6) << ','
       << fixed(p.stat.std, 6) << ',' << p.stat.n << '\n';
  }
  return os.str();
}

json rows_to_json(const std::vector<ComparisonRow>& rows) {
  json out = json::array();
  for (const auto& row : rows) {
    json bands = json::object();
    for (const auto& [b, r] : row.bands) bands[to_string(b)] = {{"stat", r.stat}, {"runs", r.runs}};
    const auto flag = row.flagged();
    out.push_back({{"model", to_string(row.config.family)},
                   {"configuration", row.config.describe()},
                   {"config", row.config},
                   {"params", row.params},
                   {"bands", bands},
                   {"flag", flag ? json(to_string(*flag)) : json(nullptr)}});
  }
  return out;
}

std::vector<ComparisonRow> rows_from_json(const json& j) {
  std::vector<ComparisonRow> rows;
  for (const auto& jr : j) {
    ComparisonRow row;
    row.config = jr.at("config").get<ModelConfig>();
    row.params = jr.at("params").get<int64_t>();
    for (const auto& [name, jb] : jr.at("bands").items()) {
      row.bands[band_setting_from_string(name)] = {jb.at("stat").get<AccuracyStat>(),
                                                   jb.at("runs").get<std::vector<RunRecord>>()};
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

json curve_to_json(const std::vector<CurvePoint>& points) {
  json out = json::array();
  for (const auto& p : points) {
    out.push_back({{"fraction", p.fraction}, {"train_windows", p.train_windows}, {"stat", p.stat}, {"runs", p.runs}});
  }
  return out;
}

std::vector<CurvePoint> curve_from_json(const json& j) {
  std::vector<CurvePoint> out;
  for (const auto& jp : j) {
    out.push_back({jp.at("fraction").get<double>(), jp.at("train_windows").get<int64_t>(),
                   jp.at("stat").get<AccuracyStat>(), jp.at("runs").get<std::vector<RunRecord>>()});
  }
  return out;
}

}  // namespace gaitwave
