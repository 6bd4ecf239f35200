#include "gaitwave/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "gaitwave/errors.hpp"

namespace gaitwave {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kMinFrequencyGap = 0.05;

std::mt19937_64 stream(uint64_t seed, uint32_t id) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), id};
  return std::mt19937_64(seq);
}

std::string recording_name(Band band, int cls, int session) {
  return to_string(band) + "_p" + std::to_string(cls) + "_s" + std::to_string(session) + ".bin";
}

}  // namespace

std::vector<double> SynthSpec::frequencies() const {
  if (!class_frequencies.empty()) return class_frequencies;
  std::vector<double> f(static_cast<size_t>(std::max(num_classes, 0)));
  const double lo = gait_freq_range[0], hi = gait_freq_range[1];
  for (int k = 0; k < num_classes; ++k) {
    f[static_cast<size_t>(k)] = num_classes == 1 ? lo : lo + (hi - lo) * k / (num_classes - 1);
  }
  return f;
}

void SynthSpec::validate() const {
  if (num_classes < 2) throw SpecError("synthetic spec needs at least 2 classes");
  if (sessions_per_class < 1) throw SpecError("sessions_per_class must be positive");
  if (!(duration_s > 0.0) || !(rate_hz > 0.0)) throw SpecError("duration and rate must be positive");
  if (channels < 1) throw SpecError("channels must be positive");
  if (harmonic_count < 1) throw SpecError("harmonic_count must be positive");
  if (!(noise_std >= 0.0)) throw SpecError("noise_std must be non-negative");
  if (!(signal_amplitude >= 0.0)) throw SpecError("signal_amplitude must be non-negative");
  if (!(background_jitter >= 0.0 && background_jitter < 1.0)) throw SpecError("background_jitter must lie in [0, 1)");
  if (background_level.size() != 1 && background_level.size() != static_cast<size_t>(channels))
    throw SpecError("background_level needs 1 or `channels` entries");
  for (double b : background_level) {
    if (!(b >= 0.0) || !std::isfinite(b)) throw SpecError("background levels must be finite and non-negative");
  }
  if (class_frequencies.empty()) {
    if (!(gait_freq_range[0] > 0.0) || !(gait_freq_range[1] >= gait_freq_range[0]))
      throw SpecError("gait_freq_range must be an increasing pair of positive frequencies");
  } else if (class_frequencies.size() != static_cast<size_t>(num_classes)) {
    throw SpecError("class_frequencies needs one entry per class");
  }
  auto f = frequencies();
  for (double v : f) {
    if (!(v > 0.0)) throw SpecError("class frequencies must be positive");
  }
  std::sort(f.begin(), f.end());
  for (size_t i = 1; i < f.size(); ++i) {
    if (f[i] - f[i - 1] < kMinFrequencyGap - 1e-12) {
      throw SpecError("class frequencies " + std::to_string(f[i - 1]) + " and " + std::to_string(f[i]) +
                      " Hz are closer than 0.05 Hz");
    }
  }
}

SynthSpec synth_spec_from_json(const json& j) {
  static const std::vector<std::string> known{
      "num_classes",      "sessions_per_class", "duration_s",       "rate_hz",   "channels",
      "band",             "gait_freq_range",    "class_frequencies", "harmonic_count", "signal_amplitude",
      "noise_std",        "background_level",   "background_jitter", "seed"};
  if (!j.is_object()) throw SpecError("synthetic spec must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw SpecError("unknown synthetic spec key '" + key + "'");
  }
  SynthSpec s;
  try {
    s.num_classes = j.value("num_classes", s.num_classes);
    s.sessions_per_class = j.value("sessions_per_class", s.sessions_per_class);
    s.duration_s = j.value("duration_s", s.duration_s);
    s.rate_hz = j.value("rate_hz", s.rate_hz);
    s.channels = j.value("channels", s.channels);
    if (j.contains("band")) s.band = band_from_string(j["band"].get<std::string>());
    if (j.contains("gait_freq_range")) s.gait_freq_range = j["gait_freq_range"].get<std::array<double, 2>>();
    s.class_frequencies = j.value("class_frequencies", s.class_frequencies);
    s.harmonic_count = j.value("harmonic_count", s.harmonic_count);
    s.signal_amplitude = j.value("signal_amplitude", s.signal_amplitude);
    s.noise_std = j.value("noise_std", s.noise_std);
    if (j.contains("background_level")) {
      const auto& b = j["background_level"];
      s.background_level = b.is_array() ? b.get<std::vector<double>>() : std::vector<double>{b.get<double>()};
    }
    s.background_jitter = j.value("background_jitter", s.background_jitter);
    s.seed = j.value("seed", s.seed);
  } catch (const json::exception& e) {
    throw SpecError(std::string("malformed synthetic spec: ") + e.what());
  } catch (const FormatError& e) {
    throw SpecError(e.what());
  }
  s.validate();
  return s;
}

json to_json(const SynthSpec& s) {
  json j = {{"num_classes", s.num_classes},
            {"sessions_per_class", s.sessions_per_class},
            {"duration_s", s.duration_s},
            {"rate_hz", s.rate_hz},
            {"channels", s.channels},
            {"band", to_string(s.band)},
            {"gait_freq_range", s.gait_freq_range},
            {"harmonic_count", s.harmonic_count},
            {"signal_amplitude", s.signal_amplitude},
            {"noise_std", s.noise_std},
            {"background_level", s.background_level},
            {"background_jitter", s.background_jitter},
            {"seed", s.seed}};
  if (!s.class_frequencies.empty()) j["class_frequencies"] = s.class_frequencies;
  return j;
}

SynthTruth draw_truth(const SynthSpec& spec) {
  spec.validate();
  const auto K = static_cast<size_t>(spec.num_classes);
  const auto C = static_cast<size_t>(spec.channels);
  const auto H = static_cast<size_t>(spec.harmonic_count);
  SynthTruth t;
  t.frequency = spec.frequencies();

  auto rng = stream(spec.seed, 1);
  std::uniform_real_distribution<double> amp(0.5, 1.0), phase(0.0, 2.0 * std::numbers::pi);
  t.amplitude.assign(K, std::vector<std::vector<double>>(C, std::vector<double>(H)));
  t.phase = t.amplitude;
  for (size_t k = 0; k < K; ++k)
    for (size_t c = 0; c < C; ++c)
      for (size_t h = 0; h < H; ++h) {
        t.amplitude[k][c][h] = spec.signal_amplitude * amp(rng) / static_cast<double>(h + 1);
        t.phase[k][c][h] = phase(rng);
      }

  auto bg_rng = stream(spec.seed, 2);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  t.background.resize(C);
  for (size_t c = 0; c < C; ++c) {
    const double base = spec.background_level.size() == 1 ? spec.background_level[0] : spec.background_level[c];
    t.background[c] = spec.background_jitter > 0.0 ? base * (1.0 + spec.background_jitter * jitter(bg_rng)) : base;
  }

  auto off_rng = stream(spec.seed, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (size_t k = 0; k < K; ++k)
    for (int s = 0; s < spec.sessions_per_class; ++s) t.session_offset_s.push_back(unit(off_rng) / t.frequency[k]);
  return t;
}

double clean_signal(const SynthSpec& spec, const SynthTruth& truth, int cls, int session, int channel, int64_t i) {
  const auto k = static_cast<size_t>(cls), c = static_cast<size_t>(channel);
  const double t = static_cast<double>(i) / spec.rate_hz +
                   truth.session_offset_s[k * static_cast<size_t>(spec.sessions_per_class) + static_cast<size_t>(session)];
  double v = 0.0;
  for (size_t h = 0; h < truth.amplitude[k][c].size(); ++h) {
    v += truth.amplitude[k][c][h] *
         std::sin(2.0 * std::numbers::pi * static_cast<double>(h + 1) * truth.frequency[k] * t + truth.phase[k][c][h]);
  }
  return v;
}

SynthDataset synthesize(const SynthSpec& spec) {
  SynthDataset ds;
  ds.truth = draw_truth(spec);
  const auto T = static_cast<int64_t>(std::llround(spec.duration_s * spec.rate_hz));
  if (T < 1) throw SpecError("duration is shorter than one sample");
  const int C = spec.channels;

  for (double f : ds.truth.frequency) {
    if (spec.harmonic_count * f >= spec.rate_hz / 2.0) {
      ds.diagnostics.warn("harmonic " + std::to_string(spec.harmonic_count) + " of " + std::to_string(f) +
                          " Hz aliases at " + std::to_string(spec.rate_hz) + " Hz sampling");
    }
  }

  int64_t clipped = 0, total = 0;
  auto make = [&](std::optional<int> cls, int session, uint32_t stream_id, std::string id) {
    auto rng = stream(spec.seed, stream_id);
    std::normal_distribution<double> noise(0.0, 1.0);
    CsiRecording rec;
    rec.samples = Array2D<float>(T, C);
    rec.rate_hz = spec.rate_hz;
    rec.band = spec.band;
    rec.session_id = std::move(id);
    rec.person_label = cls;
    for (int64_t i = 0; i < T; ++i)
      for (int c = 0; c < C; ++c) {
        double v = ds.truth.background[static_cast<size_t>(c)] + spec.noise_std * noise(rng);
        if (cls) v += clean_signal(spec, ds.truth, *cls, session, c, i);
        if (v < 0.0) {
          v = 0.0;
          ++clipped;
        }
        rec.samples(i, c) = static_cast<float>(v);
      }
    total += T * C;
    return rec;
  };

  for (int k = 0; k < spec.num_classes; ++k)
    for (int s = 0; s < spec.sessions_per_class; ++s) {
      const auto id = static_cast<uint32_t>(100 + k * spec.sessions_per_class + s);
      ds.labelled.push_back(make(k, s, id, "synth_" + to_string(spec.band) + "_p" + std::to_string(k) + "_s" +
                                               std::to_string(s)));
    }
  ds.background = make(std::nullopt, 0, 4, "synth_" + to_string(spec.band) + "_background");

  ds.clipped_fraction = static_cast<double>(clipped) / static_cast<double>(total);
  if (ds.clipped_fraction > 0.01) {
    ds.diagnostics.warn("clipping at zero affected " + std::to_string(100.0 * ds.clipped_fraction) +
                        "% of samples; raise background_level");
  }
  return ds;
}

fs::path generate(const SynthSpec& spec, const fs::path& out_dir, Diagnostics* diag) {
  const auto ds = synthesize(spec);
  fs::create_directories(out_dir);
  DatasetManifest m;
  m.num_classes = spec.num_classes;
  for (int k = 0; k < spec.num_classes; ++k)
    for (int s = 0; s < spec.sessions_per_class; ++s) {
      const auto name = recording_name(spec.band, k, s);
      write_recording(out_dir / name, ds.labelled[static_cast<size_t>(k * spec.sessions_per_class + s)]);
      m.entries.push_back({name, spec.band, spec.rate_hz, k, false, std::nullopt});
    }
  const auto bg_name = to_string(spec.band) + "_background.bin";
  write_recording(out_dir / bg_name, ds.background);
  m.entries.push_back({bg_name, spec.band, spec.rate_hz, std::nullopt, true, std::nullopt});
  const auto manifest_path = out_dir / "manifest.json";
  write_manifest(manifest_path, m);
  if (diag) {
    for (const auto& w : ds.diagnostics.warnings) diag->warn(w);
  }
  return manifest_path;
}

std::vector<double> channel_mean_spectrum(const Array2D<double>& window) {
  const int64_t L = window.rows(), C = window.cols();
  const int64_t bins = L / 2 + 1;
  std::vector<double> cos_table(static_cast<size_t>(L)), sin_table(static_cast<size_t>(L));
  for (int64_t n = 0; n < L; ++n) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(L);
    cos_table[static_cast<size_t>(n)] = std::cos(a);
    sin_table[static_cast<size_t>(n)] = std::sin(a);
  }
  std::vector<double> out(static_cast<size_t>(bins), 0.0);
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t b = 0; b < bins; ++b) {
      double re = 0.0, im = 0.0;
      for (int64_t n = 0; n < L; ++n) {
        const auto idx = static_cast<size_t>((b * n) % L);
        re += window(n, c) * cos_table[idx];
        im -= window(n, c) * sin_table[idx];
      }
      out[static_cast<size_t>(b)] += std::hypot(re, im);
    }
  }
  for (auto& v : out) v /= static_cast<double>(C);
  return out;
}

SpectralOracle::SpectralOracle(const SynthSpec& spec, const SynthTruth& truth, int64_t window_length)
    : background_(truth.background) {
  if (window_length < 1) throw ParameterError("oracle window length must be positive");
  const auto T = static_cast<int64_t>(std::llround(spec.duration_s * spec.rate_hz));
  const int64_t per_session = T / window_length;
  if (per_session < 1) throw ParameterError("sessions are shorter than one oracle window");
  const int C = spec.channels;
  for (int k = 0; k < spec.num_classes; ++k) {
    std::vector<double> sum(static_cast<size_t>(window_length / 2 + 1), 0.0);
    int64_t count = 0;
    for (int s = 0; s < spec.sessions_per_class; ++s)
      for (int64_t w = 0; w < per_session; ++w) {
        Array2D<double> win(window_length, C);
        for (int64_t i = 0; i < window_length; ++i)
          for (int c = 0; c < C; ++c) win(i, c) = clean_signal(spec, truth, k, s, c, w * window_length + i);
        const auto spec_w = channel_mean_spectrum(win);
        for (size_t b = 0; b < sum.size(); ++b) sum[b] += spec_w[b];
        ++count;
      }
    for (auto& v : sum) v /= static_cast<double>(count);
    templates_.push_back(std::move(sum));
  }
}

int SpectralOracle::classify(const Array2D<double>& window) const {
  if (window.cols() != static_cast<int64_t>(background_.size()))
    throw DimensionError("oracle window has the wrong channel count");
  Array2D<double> centred = window;
  for (int64_t i = 0; i < centred.rows(); ++i)
    for (int64_t c = 0; c < centred.cols(); ++c) centred(i, c) -= background_[static_cast<size_t>(c)];
  const auto s = channel_mean_spectrum(centred);
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < templates_.size(); ++k) {
    if (templates_[k].size() != s.size()) throw DimensionError("oracle window length differs from its templates");
    double d = 0.0;
    for (size_t b = 0; b < s.size(); ++b) d += (s[b] - templates_[k][b]) * (s[b] - templates_[k][b]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

}  // namespace gaitwave
