// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion ids as
// arguments to run a subset, e.g. `acceptance 1 2c`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gaitwave/cli.hpp"
#include "gaitwave/config.hpp"
#include "gaitwave/experiments.hpp"
#include "gaitwave/synthgen.hpp"
#include "gaitwave/train.hpp"
#include "gradcheck.hpp"
#include "toy_models.hpp"

using namespace gaitwave;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  enum Kind { pass, fail, skip } kind = fail;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- 1: parameter counts -------------------------------------------------

Outcome param_counts() {
  struct Target {
    const char* name;
    ModelConfig cfg;
    double expected, tol;
  };
  auto cfg = [](Family f) {
    ModelConfig c;
    c.family = f;
    c.input_channels = 52;
    c.num_classes = 20;
    return c;
  };
  ModelConfig tcn = cfg(Family::tcn);
  tcn.channels = {64, 128};
  tcn.kernel_size = 2;
  ModelConfig lstm = cfg(Family::lstm_humanfi);
  lstm.hidden_dim = 64;
  lstm.num_layers = 1;
  lstm.bidirectional = true;
  ModelConfig resnet = cfg(Family::custom_resnet1d);
  resnet.residual_layers = {1, 1, 1, 1};
  ModelConfig jaril = cfg(Family::opt_resnet1d_jaril);
  jaril.base_width = 128;
  const std::vector<Target> targets{{"tcn", tcn, 79e3, 0.05},
                                    {"lstm_humanfi", lstm, 63e3, 0.05},
                                    {"custom_resnet1d", resnet, 1.9e6, 0.10},
                                    {"opt_resnet1d_jaril", jaril, 7.07e6, 0.15}};
  Outcome o{Outcome::pass, ""};
  for (const auto& t : targets) {
    const auto n = count_params(*build_model(t.cfg));
    const bool ok = std::abs(static_cast<double>(n) - t.expected) <= t.tol * t.expected;
    if (!ok) o.kind = Outcome::fail;
    o.detail += std::string(t.name) + " " + std::to_string(n) + (ok ? "" : " (out of tolerance)") + "; ";
  }
  return o;
}

// ---- 2a: synthetic end to end ---------------------------------------------

SynthSpec end_to_end_spec() {
  SynthSpec s;
  s.num_classes = 5;
  s.sessions_per_class = 2;
  s.duration_s = 60;
  s.rate_hz = 10;
  s.channels = 30;
  s.signal_amplitude = 1.0;
  s.noise_std = 0.1;  // 10% of the signal amplitude
  s.seed = 2024;
  return s;
}

BandData prepare(const SynthDataset& ds, int k, bool subtract, uint64_t split_seed = 0) {
  LoadedBand raw{ds.labelled, {ds.background}};
  BandOptions opt;
  opt.background_subtraction = subtract;
  opt.split_seed = split_seed;
  return prepare_band(raw, BandSetting::mmwave_10hz, k, opt);
}

// Widths used for the "toy width" families in the end-to-end check.
ModelConfig small_config(Family f) {
  ModelConfig c = testing::toy_config(f, 30, 5);
  c.hidden_dim = 16;
  c.base_width = 8;
  c.channels = {16, 32};
  return c;
}

Outcome end_to_end() {
  const auto spec = end_to_end_spec();
  const auto ds = synthesize(spec);
  const auto data = prepare(ds, spec.num_classes, true);

  // Independent oracle on the test windows of the same split, from the raw recordings.
  SpectralOracle oracle(spec, ds.truth, data.window_length);
  std::vector<Window> raw_windows;
  for (const auto& rec : ds.labelled)
    for (auto& w : segment(rec, 5.0)) raw_windows.push_back(std::move(w));
  int correct = 0;
  for (int64_t i : data.split.test) correct += oracle.classify(raw_windows[static_cast<size_t>(i)].samples) ==
                                               raw_windows[static_cast<size_t>(i)].label;
  const double oracle_acc = static_cast<double>(correct) / static_cast<double>(data.split.test.size());

  TrainSettings s;
  s.epochs = 30;
  s.batch_size = 8;
  s.learning_rate = 5e-3;
  s.early_stop_patience = 30;
  s.seed = 0;

  Outcome o{Outcome::pass, "oracle " + fmt("%.3f", oracle_acc) + "; "};
  if (oracle_acc < 0.99) o.kind = Outcome::fail;

  // Mean over three seeds: the test split holds 25 windows, so one run moves in steps of 0.04.
  const ModelConfig tcn = bind_config(small_config(Family::tcn), data);
  std::vector<double> tcn_runs;
  double slowest = 0.0;
  for (uint64_t seed = 0; seed < 3; ++seed) {
    TrainSettings ts = s;
    ts.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();
    tcn_runs.push_back(train(tcn, data.windows, data.split, ts).record.test_accuracy);
    slowest = std::max(slowest, seconds_since(t0));
  }
  const double tcn_acc = AccuracyStat::from_runs(tcn_runs).mean;
  o.detail += "tcn [16,32] mean " + fmt("%.3f", tcn_acc) + " (runs";
  for (double a : tcn_runs) o.detail += " " + fmt("%.2f", a);
  o.detail += "), slowest run " + fmt("%.1f", slowest) + " s; ";
  if (tcn_acc < 0.95 || slowest > 300.0) o.kind = Outcome::fail;

  for (Family f : kAllFamilies) {
    if (f == Family::tcn) continue;
    const double acc = train(bind_config(small_config(f), data), data.windows, data.split, s).record.test_accuracy;
    o.detail += to_string(f) + " " + fmt("%.3f", acc) + "; ";
    if (acc < 0.80) o.kind = Outcome::fail;
  }
  return o;
}

// ---- 2b: background subtraction -------------------------------------------

Outcome background_effect() {
  SynthSpec spec = end_to_end_spec();
  spec.background_level = {10.0};  // 10x the signal amplitude
  spec.background_jitter = 0.5;
  spec.seed = 77;
  const auto ds = synthesize(spec);
  TrainSettings s;
  s.epochs = 30;
  s.batch_size = 8;
  s.learning_rate = 5e-3;
  s.early_stop_patience = 30;
  s.standardize = false;  // otherwise per-channel standardization removes the static clutter as well
  s.repeats = 3;
  const ModelConfig tcn = small_config(Family::tcn);
  double mean[2];
  for (int sub = 0; sub < 2; ++sub) {
    const auto data = prepare(ds, spec.num_classes, sub == 1);
    mean[sub] = repeat_runs(bind_config(tcn, data), data.windows, data.split, s).stat.mean;
  }
  const double gap = mean[1] - mean[0];
  return {gap >= 0.05 ? Outcome::pass : Outcome::fail,
          "with subtraction " + fmt("%.3f", mean[1]) + ", without " + fmt("%.3f", mean[0]) + ", gap " +
              fmt("%.3f", gap) + " (need >= 0.05)"};
}

// ---- 2c: gradient checks ---------------------------------------------------

Outcome gradient_checks() {
  Outcome o{Outcome::pass, ""};
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n;
  nn::Tensor xt({4, 10, 3});
  for (auto& v : xt.values()) v = n(rng);
  for (Family f : kAllFamilies) {
    auto m = build_model(testing::toy_config(f), 21);
    nn::Var x(xt);
    nn::Tensor y({4, 2}, {1, 0, 0, 1, 1, 0, 0, 1});
    std::mt19937_64 drop(0);
    auto loss = [&] {
      nn::ForwardContext ctx{true, &drop};
      return nn::soft_cross_entropy(m->forward(x, ctx), y);
    };
    std::vector<std::pair<std::string, nn::Var>> inputs;
    for (const auto& p : m->store().parameters()) inputs.emplace_back(p.name, p.var);
    const auto r = testing::check_gradients(loss, inputs);
    if (r.max_rel_error > 1e-3) o.kind = Outcome::fail;
    o.detail += to_string(f) + " " + fmt("%.1e", r.max_rel_error) + "; ";
  }
  return o;
}

// ---- 3: significance rule --------------------------------------------------

Outcome significance() {
  const bool a = significantly_better({0.963, 0.006, 3}, {0.91, 0.017, 3});
  const bool b = significantly_better({0.9, 0.05, 3}, {0.8, 0.05, 3});
  return {a && !b ? Outcome::pass : Outcome::fail,
          std::string("(0.963,0.006) vs (0.91,0.017) -> ") + (a ? "true" : "false") +
              "; (0.9,0.05) vs (0.8,0.05) -> " + (b ? "true" : "false")};
}

// ---- 4: aggregation --------------------------------------------------------

ComparisonRow row(Family f, double low, double low_sd, double high, double high_sd, double mm, double mm_sd) {
  ComparisonRow r;
  r.config.family = f;
  r.bands[BandSetting::sub6_10hz] = {{low, low_sd, 3}, {}};
  r.bands[BandSetting::sub6_200hz] = {{high, high_sd, 3}, {}};
  r.bands[BandSetting::mmwave_10hz] = {{mm, mm_sd, 3}, {}};
  return r;
}

Outcome aggregation() {
  // Orderings tallied by hand, per row (mm > low, mm > high, mm >> low, mm >> high):
  // 1 humanfi  yes yes yes yes | 2 humanfi no no no no | 3 bilstm yes yes no no
  // 4 tcn      yes yes yes yes | 5 resnet  yes yes no no | 6 jaril no no no no
  const std::vector<ComparisonRow> rows{
      row(Family::lstm_humanfi, 0.80, 0.01, 0.85, 0.01, 0.90, 0.01),
      row(Family::lstm_humanfi, 0.90, 0.02, 0.88, 0.02, 0.85, 0.02),
      row(Family::cnn_bilstm_temporal_attn, 0.70, 0.05, 0.75, 0.05, 0.78, 0.05),
      row(Family::tcn, 0.91, 0.017, 0.95, 0.01, 0.963, 0.006),
      row(Family::custom_resnet1d, 0.80, 0.05, 0.82, 0.01, 0.90, 0.05),
      row(Family::opt_eca_resnet1d_jaril, 0.60, 0.0, 0.70, 0.0, 0.60, 0.0),
  };
  struct Expected {
    Scope scope;
    int total, better_low, better_high, sig_low, sig_high;
  };
  const Expected expected[] = {{Scope::all, 6, 4, 4, 2, 2},
                               {Scope::excl_lstm_humanfi, 4, 3, 3, 1, 1},
                               {Scope::excl_all_lstm, 3, 2, 2, 1, 1}};
  bool ok = true;
  for (const auto& e : expected) {
    const auto s = aggregate(rows, e.scope);
    ok = ok && s.total == e.total && s.count_better_than_low == e.better_low &&
         s.count_better_than_high == e.better_high && s.count_sig_better_low == e.sig_low &&
         s.count_sig_better_high == e.sig_high;
  }

  std::vector<ComparisonRow> big;
  const std::pair<Family, int> sizes[] = {
      {Family::lstm_humanfi, 64},       {Family::cnn_bilstm_temporal_attn, 16}, {Family::cnn_bilstm_dual_attn, 16},
      {Family::tcn, 16},                {Family::custom_resnet1d, 12},          {Family::custom_eca_resnet1d, 12},
      {Family::opt_resnet1d_jaril, 12}, {Family::opt_eca_resnet1d_jaril, 12}};
  for (const auto& [f, n] : sizes)
    for (int i = 0; i < n; ++i) big.push_back(row(f, 0.8, 0.01, 0.8, 0.01, 0.9, 0.01));
  const int all = aggregate(big, Scope::all).total, no_humanfi = aggregate(big, Scope::excl_lstm_humanfi).total,
            no_lstm = aggregate(big, Scope::excl_all_lstm).total;
  ok = ok && all == 160 && no_humanfi == 96 && no_lstm == 64;
  return {ok ? Outcome::pass : Outcome::fail, "hand counts for 3 scopes " + std::string(ok ? "match" : "differ") +
                                                  "; scope sizes " + std::to_string(all) + "/" +
                                                  std::to_string(no_humanfi) + "/" + std::to_string(no_lstm)};
}

// ---- 5: learning curve -----------------------------------------------------

Outcome curve() {
  SynthSpec spec = end_to_end_spec();
  spec.duration_s = 100;  // 40 windows per class, so a 15% test split is whole windows
  spec.seed = 31;
  const auto ds = synthesize(spec);
  const auto data = prepare(ds, spec.num_classes, true, 4);

  ModelConfig cfg;
  cfg.family = Family::tcn;
  cfg.channels = {64, 128, 128};
  cfg.kernel_size = 2;
  cfg.dropout = 0.5;
  cfg.mixup = true;
  TrainSettings s;
  s.epochs = 30;
  s.batch_size = 8;
  s.learning_rate = 2e-3;
  s.early_stop_patience = 30;
  s.repeats = 3;
  const auto points = learning_curve(cfg, data, kDefaultFractions, s);

  Outcome o{Outcome::pass, ""};
  const bool seven = points.size() == 7;
  bool fractions_ok = seven;
  for (size_t i = 0; seven && i < 7; ++i) fractions_ok = fractions_ok && points[i].fraction == kDefaultFractions[i];
  const double test_share = static_cast<double>(data.split.test.size()) / static_cast<double>(data.windows.size());
  bool nested = true;
  std::vector<int64_t> prev;
  for (double f : kDefaultFractions) {
    auto sub = subsample_train(data.windows, data.split, f, data.split.seed);
    if (!prev.empty()) nested = nested && std::includes(prev.begin(), prev.end(), sub.begin(), sub.end());
    for (int64_t i : sub) nested = nested && !std::binary_search(data.split.test.begin(), data.split.test.end(), i);
    prev = sub;
  }
  const double hi = points.front().stat.mean, lo = points.back().stat.mean;
  if (!fractions_ok || std::abs(test_share - 0.15) > 1e-12 || !nested || hi < lo) o.kind = Outcome::fail;
  o.detail = std::to_string(points.size()) + " points; test share " + fmt("%.3f", test_share) + "; nested " +
             (nested ? "yes" : "no") + "; mean(0.7) " + fmt("%.3f", hi) + " vs mean(0.1) " + fmt("%.3f", lo);
  return o;
}

// ---- 6: data layer ---------------------------------------------------------

CsiRecording random_recording(int64_t t, int64_t c, double rate, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 40.0f);
  CsiRecording rec;
  rec.samples = Array2D<float>(t, c);
  for (auto& v : rec.samples.values()) v = u(rng);
  rec.rate_hz = rate;
  rec.session_id = "s" + std::to_string(seed);
  rec.person_label = 0;
  return rec;
}

Outcome data_layer() {
  const fs::path dir = fs::temp_directory_path() / ("gaitwave_accept_" + std::to_string(std::random_device{}()));
  fs::create_directories(dir);
  const auto rec = random_recording(2000, 52, 200.0, 3);
  write_recording(dir / "r.bin", rec);
  const auto back = read_recording(dir / "r.bin");
  fs::remove_all(dir);
  const bool exact = back.samples.rows() == rec.samples.rows() && back.samples.cols() == rec.samples.cols() &&
                     std::memcmp(back.samples.values().data(), rec.samples.values().data(),
                                 rec.samples.values().size() * sizeof(float)) == 0;

  const auto down = downsample(random_recording(520000, 2, 200.0, 4), 10.0);
  const auto windows = segment(random_recording(26000, 2, 10.0, 5), 5.0);

  std::mt19937_64 rng(99);
  int bad_splits = 0;
  for (int m = 0; m < 1000; ++m) {
    const int classes = std::uniform_int_distribution<int>(2, 20)(rng);
    std::vector<Window> ws;
    for (int k = 0; k < classes; ++k) {
      const int sessions = std::uniform_int_distribution<int>(1, 4)(rng);
      for (int s = 0; s < sessions; ++s) {
        const int per_session = std::uniform_int_distribution<int>(3, 30)(rng);
        for (int i = 0; i < per_session; ++i) {
          Window w;
          w.label = k;
          ws.push_back(std::move(w));
        }
      }
    }
    const auto split = make_splits(ws, {0.7, 0.15, 0.15}, rng());
    std::vector<int64_t> all;
    for (const auto* part : {&split.train, &split.val, &split.test}) all.insert(all.end(), part->begin(), part->end());
    std::sort(all.begin(), all.end());
    bool ok = all.size() == ws.size();
    for (size_t i = 0; ok && i < all.size(); ++i) ok = all[i] == static_cast<int64_t>(i);
    std::set<int> train_classes;
    for (int64_t i : split.train) train_classes.insert(ws[static_cast<size_t>(i)].label);
    ok = ok && static_cast<int>(train_classes.size()) == classes;
    bad_splits += !ok;
  }
  const bool ok = exact && down.length() == 26000 && windows.size() == 520 && bad_splits == 0;
  return {ok ? Outcome::pass : Outcome::fail,
          std::string("round trip ") + (exact ? "bit exact" : "differs") + "; 520000 -> " +
              std::to_string(down.length()) + "; 26000 samples -> " + std::to_string(windows.size()) +
              " windows; splits failing " + std::to_string(bad_splits) + "/1000"};
}

// ---- 7: determinism ---------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome determinism() {
  const fs::path config = fs::path(GAITWAVE_SOURCE_DIR) / "configs" / "quickstart.json";
  const fs::path base = fs::temp_directory_path() / ("gaitwave_det_" + std::to_string(std::random_device{}()));
  std::string results[2];
  double elapsed[2];
  for (int i = 0; i < 2; ++i) {
    const auto out = base / std::to_string(i);
    ::setenv("GAITWAVE_OUT", out.c_str(), 1);
    std::ostringstream so, se;
    const auto t0 = std::chrono::steady_clock::now();
    const int code = cli::cmd_run(config, {}, so, se);
    elapsed[i] = seconds_since(t0);
    ::unsetenv("GAITWAVE_OUT");
    if (code != cli::kExitOk) {
      fs::remove_all(base);
      return {Outcome::fail, "quickstart exited with " + std::to_string(code) + ": " + se.str()};
    }
    results[i] = slurp(out / "results.json");
  }
  fs::remove_all(base);
  const bool same = !results[0].empty() && results[0] == results[1];
  return {same && elapsed[0] <= 600.0 ? Outcome::pass : Outcome::fail,
          std::string("results.json ") + (same ? "byte identical" : "differs") + " (" +
              std::to_string(results[0].size()) + " bytes); quickstart " + fmt("%.0f", elapsed[0]) + " s"};
}

// ---- 8: real data (optional) -----------------------------------------------

Outcome real_data() {
  const char* manifest = std::getenv("GAITWAVE_REAL_MANIFEST");
  if (!manifest || !*manifest) return {Outcome::skip, "set GAITWAVE_REAL_MANIFEST to a canonical 60 GHz manifest"};
  const auto m = read_manifest(manifest);
  const auto raw = load_band(manifest, m, Band::mmwave);
  BandOptions opt;
  opt.background_subtraction = true;
  const auto data = prepare_band(raw, BandSetting::mmwave_10hz, m.num_classes, opt);
  ModelConfig tcn;
  tcn.family = Family::tcn;
  tcn.channels = {64, 128};
  tcn.dropout = 0.5;
  tcn.mixup = true;
  const auto r = repeat_runs(bind_config(tcn, data), data.windows, data.split, TrainSettings{});
  const bool ok = std::abs(r.stat.mean - 0.96) <= 0.05;
  return {ok ? Outcome::pass : Outcome::fail, "tcn 60 GHz with subtraction " + fmt("%.3f", r.stat.mean) + " (0.96 +/- 0.05)"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::pair<const char*, std::function<Outcome()>>>> criteria{
      {"1", {"parameter counts", param_counts}},
      {"2a", {"synthetic end to end", end_to_end}},
      {"2b", {"background subtraction effect", background_effect}},
      {"2c", {"gradient checks", gradient_checks}},
      {"3", {"significance rule", significance}},
      {"4", {"aggregation", aggregation}},
      {"5", {"learning curve", curve}},
      {"6", {"data layer invariants", data_layer}},
      {"7", {"determinism", determinism}},
      {"8", {"real data ballpark (optional)", real_data}},
  };
  std::set<std::string> only(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& [id, c] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = c.second();
    } catch (const std::exception& e) {
      o = {Outcome::fail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.kind == Outcome::pass ? "PASS" : o.kind == Outcome::fail ? "FAIL" : "SKIP";
    if (o.kind == Outcome::fail && id != "8") ++failures;
    while (o.detail.size() >= 2 && o.detail.compare(o.detail.size() - 2, 2, "; ") == 0) o.detail.resize(o.detail.size() - 2);
    std::printf("%s %s %s: %s [%.1f s]\n", tag, id.c_str(), c.first, o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
