#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gaitwave/csi_data.hpp"
#include "gaitwave/nn/tensor.hpp"

namespace gaitwave {

struct BackgroundProfile {
  std::vector<double> mean_amplitude;  // one entry per channel
  Band band = Band::sub6;
  std::string source_session;
};

enum class BackgroundStatistic { mean, median };

// Per-channel temporal mean (or median) of an unlabelled recording.
// Throws MisuseError when the recording carries a person label.
BackgroundProfile compute_background(const CsiRecording& rec,
                                     BackgroundStatistic stat = BackgroundStatistic::mean);

// out[t, c] = w[t, c] - bg[c]. Throws DimensionError on a channel mismatch.
Window subtract_background(const Window& w, const BackgroundProfile& bg);

struct SmoothingParams {
  int kernel_size = 5;
  double sigma = 1.0;
  double apply_probability = 0.5;

  void validate() const;
};

struct MixupParams {
  double alpha = 0.2;
  bool enabled = true;
};

// Normalized kernel exp(-i^2 / 2 sigma^2) for i in [-(k-1)/2, (k-1)/2].
std::vector<double> gaussian_kernel(int kernel_size, double sigma);

// Temporal Gaussian smoothing with reflect padding, applied with probability p
// (one draw from `rng` per call). Throws ParameterError for even k or k > L.
Window gaussian_smooth(const Window& w, const SmoothingParams& params, std::mt19937_64& rng);

struct MixedBatch {
  nn::Tensor x;  // [B, L, C]
  nn::Tensor y;  // [B, K] soft labels
  double lambda = 1.0;
  std::vector<int64_t> partner;  // item i is mixed with item partner[i]
};

// lambda ~ Beta(alpha, alpha) drawn once per batch unless `forced_lambda` is
// given; each item is paired through a seeded random permutation.
MixedBatch mixup_batch(const nn::Tensor& x, const nn::Tensor& y, const MixupParams& params,
                       std::mt19937_64& rng, std::optional<double> forced_lambda = std::nullopt);

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> std;  // population standard deviation
};

// Statistics over every time step of every window (training split only).
ChannelStats channel_stats(const std::vector<const Window*>& windows);
ChannelStats channel_stats(const std::vector<Window>& windows);

// (w - mean) / max(std, 1e-8), per channel.
Window standardize(const Window& w, const ChannelStats& stats);

}  // namespace gaitwave
