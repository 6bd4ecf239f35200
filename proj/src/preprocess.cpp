#include "gaitwave/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gaitwave/errors.hpp"

namespace gaitwave {

BackgroundProfile compute_background(const CsiRecording& rec, BackgroundStatistic stat) {
  if (rec.person_label) {
    throw MisuseError("recording " + rec.session_id + " is labelled; a background profile needs an empty room");
  }
  const int64_t t = rec.length(), c = rec.channels();
  if (t < 1) throw MisuseError("background recording is empty");
  BackgroundProfile bg;
  bg.band = rec.band;
  bg.source_session = rec.session_id;
  bg.mean_amplitude.assign(static_cast<size_t>(c), 0.0);
  std::vector<double> column(static_cast<size_t>(t));
  for (int64_t j = 0; j < c; ++j) {
    for (int64_t i = 0; i < t; ++i) column[static_cast<size_t>(i)] = rec.samples(i, j);
    double value = 0.0;
    if (stat == BackgroundStatistic::mean) {
      value = std::accumulate(column.begin(), column.end(), 0.0) / static_cast<double>(t);
    } else {
      const auto mid = column.begin() + t / 2;
      std::nth_element(column.begin(), mid, column.end());
      value = *mid;
      if (t % 2 == 0) value = 0.5 * (value + *std::max_element(column.begin(), mid));
    }
    bg.mean_amplitude[static_cast<size_t>(j)] = value;
  }
  return bg;
}

Window subtract_background(const Window& w, const BackgroundProfile& bg) {
  const int64_t c = w.samples.cols();
  if (static_cast<int64_t>(bg.mean_amplitude.size()) != c) {
    throw DimensionError("background has " + std::to_string(bg.mean_amplitude.size()) +
                         " channels, window has " + std::to_string(c));
  }
  Window out = w;
  for (int64_t i = 0; i < out.samples.rows(); ++i)
    for (int64_t j = 0; j < c; ++j) out.samples(i, j) -= bg.mean_amplitude[static_cast<size_t>(j)];
  return out;
}

void SmoothingParams::validate() const {
  if (kernel_size < 1 || kernel_size % 2 == 0)
    throw ParameterError("smoothing kernel size must be odd and positive, got " + std::to_string(kernel_size));
  if (!(sigma > 0.0)) throw ParameterError("smoothing sigma must be positive");
  if (!(apply_probability >= 0.0 && apply_probability <= 1.0))
    throw ParameterError("smoothing probability must lie in [0, 1]");
}

std::vector<double> gaussian_kernel(int kernel_size, double sigma) {
  SmoothingParams{kernel_size, sigma, 1.0}.validate();
  const int half = (kernel_size - 1) / 2;
  std::vector<double> k(static_cast<size_t>(kernel_size));
  for (int i = -half; i <= half; ++i) k[static_cast<size_t>(i + half)] = std::exp(-(i * i) / (2.0 * sigma * sigma));
  const double sum = std::accumulate(k.begin(), k.end(), 0.0);
  for (auto& v : k) v /= sum;
  return k;
}

Window gaussian_smooth(const Window& w, const SmoothingParams& params, std::mt19937_64& rng) {
  params.validate();
  const int64_t len = w.samples.rows(), c = w.samples.cols();
  if (params.kernel_size > len) {
    throw ParameterError("smoothing kernel of " + std::to_string(params.kernel_size) +
                         " exceeds window length " + std::to_string(len));
  }
  std::bernoulli_distribution apply(params.apply_probability);
  if (!apply(rng)) return w;

  const auto kernel = gaussian_kernel(params.kernel_size, params.sigma);
  const int64_t half = (params.kernel_size - 1) / 2;
  auto reflect = [len](int64_t i) {
    if (i < 0) return -i;
    if (i >= len) return 2 * (len - 1) - i;
    return i;
  };
  Window out = w;
  for (int64_t t = 0; t < len; ++t) {
    for (int64_t j = 0; j < c; ++j) {
      double s = 0.0;
      for (int64_t o = -half; o <= half; ++o) s += kernel[static_cast<size_t>(o + half)] * w.samples(reflect(t + o), j);
      out.samples(t, j) = s;
    }
  }
  return out;
}

MixedBatch mixup_batch(const nn::Tensor& x, const nn::Tensor& y, const MixupParams& params, std::mt19937_64& rng,
                       std::optional<double> forced_lambda) {
  if (!(params.alpha > 0.0)) throw ParameterError("mixup alpha must be positive");
  if (x.rank() < 2 || y.rank() != 2 || x.dim(0) != y.dim(0))
    throw DimensionError("mixup needs x [B, ...] and y [B, K] with matching batch sizes");
  const int64_t batch = x.dim(0);
  if (batch < 2) throw MisuseError("mixup needs a batch of at least two items");

  MixedBatch out;
  if (forced_lambda) {
    out.lambda = *forced_lambda;
  } else {
    std::gamma_distribution<double> gamma(params.alpha, 1.0);
    const double a = gamma(rng), b = gamma(rng);
    out.lambda = (a + b > 0.0) ? a / (a + b) : 0.5;
  }
  out.partner.resize(static_cast<size_t>(batch));
  std::iota(out.partner.begin(), out.partner.end(), 0);
  std::shuffle(out.partner.begin(), out.partner.end(), rng);

  const double lam = out.lambda;
  auto mix = [&](const nn::Tensor& src) {
    nn::Tensor dst(src.shape());
    const int64_t row = src.numel() / batch;
    for (int64_t i = 0; i < batch; ++i) {
      const int64_t p = out.partner[static_cast<size_t>(i)];
      for (int64_t k = 0; k < row; ++k) dst[i * row + k] = lam * src[i * row + k] + (1.0 - lam) * src[p * row + k];
    }
    return dst;
  };
  out.x = mix(x);
  out.y = mix(y);
  return out;
}

ChannelStats channel_stats(const std::vector<const Window*>& windows) {
  if (windows.empty()) throw MisuseError("channel statistics need at least one window");
  const int64_t c = windows.front()->samples.cols();
  std::vector<double> sum(static_cast<size_t>(c), 0.0);
  int64_t n = 0;
  for (const Window* w : windows) {
    if (w->samples.cols() != c) throw DimensionError("windows disagree on channel count");
    for (int64_t i = 0; i < w->samples.rows(); ++i)
      for (int64_t j = 0; j < c; ++j) sum[static_cast<size_t>(j)] += w->samples(i, j);
    n += w->samples.rows();
  }
  ChannelStats st;
  st.mean.resize(static_cast<size_t>(c));
  for (int64_t j = 0; j < c; ++j) st.mean[static_cast<size_t>(j)] = sum[static_cast<size_t>(j)] / static_cast<double>(n);
  std::vector<double> sq(static_cast<size_t>(c), 0.0);
  for (const Window* w : windows)
    for (int64_t i = 0; i < w->samples.rows(); ++i)
      for (int64_t j = 0; j < c; ++j) {
        const double d = w->samples(i, j) - st.mean[static_cast<size_t>(j)];
        sq[static_cast<size_t>(j)] += d * d;
      }
  st.std.resize(static_cast<size_t>(c));
  for (int64_t j = 0; j < c; ++j) st.std[static_cast<size_t>(j)] = std::sqrt(sq[static_cast<size_t>(j)] / static_cast<double>(n));
  return st;
}

ChannelStats channel_stats(const std::vector<Window>& windows) {
  std::vector<const Window*> ptrs;
  ptrs.reserve(windows.size());
  for (const auto& w : windows) ptrs.push_back(&w);
  return channel_stats(ptrs);
}

Window standardize(const Window& w, const ChannelStats& stats) {
  const int64_t c = w.samples.cols();
  if (static_cast<int64_t>(stats.mean.size()) != c || static_cast<int64_t>(stats.std.size()) != c)
    throw DimensionError("standardization statistics do not match the window's channels");
  Window out = w;
  for (int64_t i = 0; i < out.samples.rows(); ++i)
    for (int64_t j = 0; j < c; ++j) {
      const auto k = static_cast<size_t>(j);
      out.samples(i, j) = (out.samples(i, j) - stats.mean[k]) / std::max(stats.std[k], 1e-8);
    }
  return out;
}

}  // namespace gaitwave
