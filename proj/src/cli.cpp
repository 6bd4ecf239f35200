#include "gaitwave/cli.hpp"

#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "gaitwave/config.hpp"
#include "gaitwave/errors.hpp"
#include "gaitwave/synthgen.hpp"

namespace gaitwave::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kResultsFile = "results.json";

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot write " + tmp.string());
    os << text;
    if (!os) throw Error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

void print_warnings(const Diagnostics& diag, std::ostream& err) {
  for (const auto& w : diag.warnings) err << "warning: " << w << '\n';
}

// One training run: a comparison cell (model, band, seed) or a learning-curve
// point (curve model, band, fraction, seed).
struct Job {
  bool curve = false;
  size_t model = 0;  // index into models, unused for curve jobs
  size_t fraction = 0;
  BandSetting band = BandSetting::sub6_10hz;
  uint64_t seed = 0;
  ModelConfig bound;
  json identity;
  std::string hash;
  std::string label;
};

struct JobOutcome {
  std::optional<RunRecord> record;
  int64_t train_windows = 0;
  std::string failure;
};

json preprocessing_json(const ExperimentConfig& cfg, const BandEntry& band) {
  const auto& t = cfg.train;
  return {{"window_seconds", cfg.window_seconds},
          {"background_subtraction", band.background_subtraction},
          {"standardize", t.standardize},
          {"smoothing", {{"k", t.smoothing.kernel_size}, {"sigma", t.smoothing.sigma}, {"p", t.smoothing.apply_probability}}},
          {"mixup", {{"alpha", t.mixup.alpha}}},
          {"split", {{"ratios", cfg.split_ratios}, {"seed", cfg.split_seed}}}};
}

json job_identity(const ExperimentConfig& cfg, const Job& job, const BandEntry& band, const json& data_source) {
  json train_j = cfg.train;
  train_j.erase("seed");
  train_j.erase("repeats");
  json id{{"kind", job.curve ? "learning_curve" : "comparison"},
          {"model", job.bound},
          {"band", to_string(job.band)},
          {"seed", job.seed},
          {"preprocessing", preprocessing_json(cfg, band)},
          {"train", train_j},
          {"data", data_source}};
  if (job.curve) id["fraction"] = cfg.learning_curve->fractions[job.fraction];
  return id;
}

struct ReportSet {
  std::vector<ComparisonRow> rows;
  std::optional<std::vector<CurvePoint>> curve;
};

std::vector<AggregateSummary> all_scopes(const std::vector<ComparisonRow>& rows) {
  return {aggregate(rows, Scope::all), aggregate(rows, Scope::excl_lstm_humanfi),
          aggregate(rows, Scope::excl_all_lstm)};
}

// Tables derived from results; cmd_run and cmd_report share this so they agree byte for byte.
void write_reports(const fs::path& dir, const ReportSet& r) {
  write_text(dir / "comparison.csv", comparison_csv(r.rows));
  write_text(dir / "comparison.md", comparison_markdown(r.rows));
  const auto sums = all_scopes(r.rows);
  write_text(dir / "aggregate.json", aggregate_json(sums).dump(2) + "\n");
  write_text(dir / "aggregate.md", aggregate_markdown(sums));
  if (r.curve) write_text(dir / "learning_curve.csv", learning_curve_csv(*r.curve));
}

void print_reports(const ReportSet& r, std::optional<Scope> scope, std::ostream& out) {
  out << comparison_markdown(r.rows) << '\n';
  if (scope) {
    out << aggregate_markdown({aggregate(r.rows, *scope)});
  } else {
    out << aggregate_markdown(all_scopes(r.rows));
  }
  if (r.curve) out << '\n' << learning_curve_csv(*r.curve);
}

std::optional<RunRecord> load_job(const fs::path& path, const json& identity, int64_t& train_windows) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    const json j = json::parse(in);
    if (j.at("identity") != identity) return std::nullopt;
    train_windows = j.at("train_windows").get<int64_t>();
    return j.at("record").get<RunRecord>();
  } catch (const std::exception&) {
    return std::nullopt;  // unreadable job files are simply rerun
  }
}

}  // namespace

int cmd_synth(const fs::path& spec_path, const fs::path& out_dir, bool force, std::ostream& out, std::ostream& err) {
  SynthSpec spec;
  try {
    std::ifstream in(spec_path);
    if (!in) throw SpecError("cannot open spec " + spec_path.string());
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw SpecError(e.what());
    }
    spec = synth_spec_from_json(j);
  } catch (const SpecError& e) {
    err << "error: " << spec_path.string() << ": " << e.what() << '\n';
    return kExitInvalid;
  }
  if (fs::exists(out_dir / "manifest.json") && !force) {
    err << "error: " << out_dir.string() << " already holds a dataset; pass --force to overwrite\n";
    return kExitRefused;
  }
  Diagnostics diag;
  try {
    generate(spec, out_dir, &diag);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  print_warnings(diag, err);

  const auto T = std::llround(spec.duration_s * spec.rate_hz);
  const auto L = std::llround(5.0 * spec.rate_hz);
  out << "band: " << to_string(spec.band) << ", " << spec.channels << " channels at " << spec.rate_hz << " Hz\n";
  out << "classes: " << spec.num_classes << '\n';
  out << "recordings: " << spec.num_classes * spec.sessions_per_class << " labelled + 1 background\n";
  out << "windows per class (5 s): " << (L > 0 ? spec.sessions_per_class * (T / L) : 0) << '\n';
  out << "manifest: " << (out_dir / "manifest.json").string() << '\n';
  return kExitOk;
}

int cmd_run(const fs::path& config_path, const RunOptions& opt, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  std::map<BandSetting, BandData> data;
  std::vector<Job> jobs;
  try {
    cfg = load_experiment_config(config_path);
    if (opt.seed) cfg.train.seed = *opt.seed;
    if (opt.jobs < 1) throw ConfigError("--jobs must be at least 1");

    Diagnostics diag;
    const int num_classes = cfg.data.begin()->second.num_classes();
    std::map<Band, LoadedBand> raw;
    for (const auto& entry : cfg.bands) {
      const Band src = source_band(entry.band);
      if (!raw.count(src)) raw[src] = cfg.data.at(src).load(src, &diag);
      BandOptions bo;
      bo.window_seconds = cfg.window_seconds;
      bo.background_subtraction = entry.background_subtraction;
      bo.split_ratios = cfg.split_ratios;
      bo.split_seed = cfg.split_seed;
      data[entry.band] = prepare_band(raw.at(src), entry.band, num_classes, bo, &diag);
    }
    print_warnings(diag, err);

    auto entry_for = [&](BandSetting b) {
      for (const auto& e : cfg.bands)
        if (e.band == b) return e;
      throw ConfigError("band not configured: " + to_string(b));
    };
    const json fp = cfg.fingerprint();
    auto add_job = [&](Job job, const ModelConfig& model) {
      job.bound = bind_config(model, data.at(job.band));
      job.bound.validate();
      job.identity = job_identity(cfg, job, entry_for(job.band), fp.at("data").at(to_string(source_band(job.band))));
      job.hash = hex64(fnv1a64(job.identity.dump()));
      job.label = to_string(model.family) + " " + model.describe() + " | " + to_string(job.band) +
                  (job.curve ? " | fraction " + fixed3(cfg.learning_curve->fractions[job.fraction]) : "") +
                  " | seed " + std::to_string(job.seed);
      jobs.push_back(std::move(job));
    };
    for (size_t m = 0; m < cfg.models.size(); ++m)
      for (const auto& entry : cfg.bands)
        for (int r = 0; r < cfg.train.repeats; ++r) {
          Job j;
          j.model = m;
          j.band = entry.band;
          j.seed = cfg.train.seed + static_cast<uint64_t>(r);
          add_job(std::move(j), cfg.models[m]);
        }
    if (cfg.learning_curve) {
      const auto& lc = *cfg.learning_curve;
      for (size_t f = 0; f < lc.fractions.size(); ++f) {
        // Fail early on a fraction that leaves a class without training windows.
        const auto& d = data.at(lc.band);
        subsample_train(d.windows, d.split, lc.fractions[f], d.split.seed);
        for (int r = 0; r < cfg.train.repeats; ++r) {
          Job j;
          j.curve = true;
          j.fraction = f;
          j.band = lc.band;
          j.seed = cfg.train.seed + static_cast<uint64_t>(r);
          add_job(std::move(j), lc.model);
        }
      }
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  }

  const fs::path out_dir = cfg.output_dir;
  const fs::path jobs_dir = out_dir / "jobs";
  if (!opt.resume && !opt.force && (fs::exists(out_dir / kResultsFile) || (fs::exists(jobs_dir) && !fs::is_empty(jobs_dir)))) {
    err << "error: " << out_dir.string() << " already holds results; pass --resume or --force\n";
    return kExitRefused;
  }
  if (opt.force && !opt.resume && fs::exists(jobs_dir)) {
    for (const auto& f : fs::directory_iterator(jobs_dir))
      if (f.path().extension() == ".json") fs::remove(f.path());
  }
  fs::create_directories(jobs_dir);

  std::vector<JobOutcome> outcomes(jobs.size());
  std::vector<size_t> pending;
  for (size_t i = 0; i < jobs.size(); ++i) {
    if (opt.resume) {
      outcomes[i].record = load_job(jobs_dir / (jobs[i].hash + ".json"), jobs[i].identity, outcomes[i].train_windows);
      if (outcomes[i].record) {
        err << "[" << i + 1 << "/" << jobs.size() << "] " << jobs[i].label << ": resumed " << jobs[i].hash << '\n';
        continue;
      }
    }
    pending.push_back(i);
  }

  std::mutex log_mutex;
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t p = next++; p < pending.size(); p = next++) {
      const size_t i = pending[p];
      const Job& job = jobs[i];
      JobOutcome& res = outcomes[i];
      const BandData& d = data.at(job.band);
      SplitAssignment split = d.split;
      if (job.curve) split.train = subsample_train(d.windows, d.split, cfg.learning_curve->fractions[job.fraction], d.split.seed);
      TrainSettings s = cfg.train;
      s.seed = job.seed;
      std::string line;
      try {
        auto r = train(job.bound, d.windows, split, s);
        res.record = r.record;
        res.train_windows = static_cast<int64_t>(split.train.size());
        json file{{"identity", job.identity}, {"train_windows", res.train_windows}, {"record", *res.record}};
        write_text(jobs_dir / (job.hash + ".json"), file.dump() + "\n");
        line = "test " + fixed3(r.record.test_accuracy) + ", val " + fixed3(r.record.best_val_accuracy) +
               " at epoch " + std::to_string(r.record.epoch_of_best);
      } catch (const std::exception& e) {
        res.failure = e.what();
        line = "FAILED: " + res.failure;
      }
      std::lock_guard lock(log_mutex);
      err << "[" << i + 1 << "/" << jobs.size() << "] " << job.label << ": " << line << '\n';
    }
  };
  const int workers = std::min<int>(opt.jobs, static_cast<int>(std::max<size_t>(pending.size(), 1)));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // Merge by key; cells with a missing run are left out of the tables.
  ReportSet report;
  json failures = json::array();
  for (size_t i = 0; i < jobs.size(); ++i)
    if (!outcomes[i].record)
      failures.push_back({{"job", jobs[i].hash}, {"label", jobs[i].label}, {"error", outcomes[i].failure}});

  for (size_t m = 0; m < cfg.models.size(); ++m) {
    ComparisonRow row;
    row.config = cfg.models[m];
    row.params = row_params(cfg.models[m], data);
    for (const auto& entry : cfg.bands) {
      BandResult br;
      bool complete = true;
      for (size_t i = 0; i < jobs.size(); ++i) {
        if (jobs[i].curve || jobs[i].model != m || jobs[i].band != entry.band) continue;
        if (!outcomes[i].record) {
          complete = false;
          break;
        }
        br.runs.push_back(*outcomes[i].record);
      }
      if (!complete) continue;
      std::vector<double> acc;
      for (const auto& r : br.runs) acc.push_back(r.test_accuracy);
      br.stat = AccuracyStat::from_runs(acc);
      row.bands[entry.band] = std::move(br);
    }
    report.rows.push_back(std::move(row));
  }
  if (cfg.learning_curve) {
    report.curve.emplace();
    for (size_t f = 0; f < cfg.learning_curve->fractions.size(); ++f) {
      CurvePoint pt;
      pt.fraction = cfg.learning_curve->fractions[f];
      bool complete = true;
      for (size_t i = 0; i < jobs.size(); ++i) {
        if (!jobs[i].curve || jobs[i].fraction != f) continue;
        if (!outcomes[i].record) {
          complete = false;
          break;
        }
        pt.train_windows = outcomes[i].train_windows;
        pt.runs.push_back(*outcomes[i].record);
      }
      if (!complete) continue;
      std::vector<double> acc;
      for (const auto& r : pt.runs) acc.push_back(r.test_accuracy);
      pt.stat = AccuracyStat::from_runs(acc);
      report.curve->push_back(std::move(pt));
    }
  }

  json results{{"version", 1},
               {"experiment", cfg.fingerprint()},
               {"complete", failures.empty()},
               {"failures", failures},
               {"rows", rows_to_json(report.rows)},
               {"learning_curve", report.curve ? curve_to_json(*report.curve) : json(nullptr)}};
  try {
    write_text(out_dir / kResultsFile, results.dump(2) + "\n");
    write_reports(out_dir, report);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  print_reports(report, std::nullopt, out);
  if (!failures.empty()) {
    err << failures.size() << " job(s) failed; partial results in " << (out_dir / kResultsFile).string() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

int cmd_report(const fs::path& results_dir, std::optional<Scope> scope, std::ostream& out, std::ostream& err) {
  const fs::path path = results_dir / kResultsFile;
  if (!fs::exists(path)) {
    err << "error: no " << kResultsFile << " in " << results_dir.string() << '\n';
    return kExitInvalid;
  }
  ReportSet report;
  try {
    std::ifstream in(path);
    const json j = json::parse(in);
    report.rows = rows_from_json(j.at("rows"));
    if (j.contains("learning_curve") && !j.at("learning_curve").is_null())
      report.curve = curve_from_json(j.at("learning_curve"));
  } catch (const std::exception& e) {
    err << "error: malformed results file " << path.string() << ": " << e.what() << '\n';
    return kExitInvalid;
  }
  try {
    write_reports(results_dir, report);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  print_reports(report, scope, out);
  return kExitOk;
}

}  // namespace gaitwave::cli
