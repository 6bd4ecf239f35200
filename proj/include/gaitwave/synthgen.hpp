#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gaitwave/csi_data.hpp"
#include "json.hpp"

namespace gaitwave {

// Synthetic gait recordings: each class walks at its own cadence f_k, which
// modulates every channel with a fixed harmonic profile on top of a static
// background.
struct SynthSpec {
  int num_classes = 5;
  int sessions_per_class = 2;
  double duration_s = 60.0;
  double rate_hz = 10.0;
  int channels = 30;
  Band band = Band::mmwave;
  // Class cadences are spread evenly over this range unless class_frequencies is set.
  std::array<double, 2> gait_freq_range{0.5, 2.0};
  std::vector<double> class_frequencies;
  int harmonic_count = 2;
  double signal_amplitude = 1.0;  // amplitude scale of the fundamental
  double noise_std = 0.1;
  // One value for every channel, or one per channel.
  std::vector<double> background_level{3.0};
  // Per-channel relative spread drawn around background_level, in [0, 1).
  double background_jitter = 0.0;
  uint64_t seed = 1;

  // Throws SpecError for an invalid spec (including cadences closer than 0.05 Hz).
  void validate() const;
  std::vector<double> frequencies() const;
};

SynthSpec synth_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SynthSpec& spec);

// Ground truth drawn from the seed, exposed for oracles and tests.
struct SynthTruth {
  std::vector<double> frequency;                            // [K]
  std::vector<std::vector<std::vector<double>>> amplitude;  // [K][C][H]
  std::vector<std::vector<std::vector<double>>> phase;      // [K][C][H]
  std::vector<double> background;                           // [C]
  std::vector<double> session_offset_s;                     // [K * sessions], class-major
};

struct SynthDataset {
  SynthTruth truth;
  std::vector<CsiRecording> labelled;  // class-major, sessions_per_class per class
  CsiRecording background;
  double clipped_fraction = 0.0;
  Diagnostics diagnostics;
};

SynthTruth draw_truth(const SynthSpec& spec);

// Noise-free class signal (background excluded) at sample index i of a session.
double clean_signal(const SynthSpec& spec, const SynthTruth& truth, int cls, int session, int channel, int64_t i);

SynthDataset synthesize(const SynthSpec& spec);

// Writes recordings plus manifest.json into out_dir; returns the manifest path.
std::filesystem::path generate(const SynthSpec& spec, const std::filesystem::path& out_dir,
                               Diagnostics* diag = nullptr);

// Magnitude DFT of each channel (bins 0..L/2), averaged over channels.
std::vector<double> channel_mean_spectrum(const Array2D<double>& window);

// Nearest-template classifier on spectra of background-subtracted windows.
class SpectralOracle {
 public:
  // Templates are the mean spectra of noise-free windows of each class, cut
  // from the generator's sessions with the given window length.
  SpectralOracle(const SynthSpec& spec, const SynthTruth& truth, int64_t window_length);

  int classify(const Array2D<double>& window) const;
  const std::vector<std::vector<double>>& templates() const { return templates_; }

 private:
  std::vector<double> background_;
  std::vector<std::vector<double>> templates_;
};

}  // namespace gaitwave
