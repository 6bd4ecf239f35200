#include "gaitwave/nn/layers.hpp"

#include <Eigen/QR>
#include <cmath>

#include "eigen_maps.hpp"
#include "gaitwave/errors.hpp"

namespace gaitwave::nn {

Var ParameterStore::add(const std::string& name, Tensor init) {
  for (const auto& p : params_) {
    if (p.name == name) throw ConfigError("duplicate parameter name " + name);
  }
  Var v(std::move(init), true);
  params_.push_back({name, v});
  return v;
}

void ParameterStore::add_buffer(const std::string& name, Tensor* tensor) {
  buffers_.push_back({name, tensor});
}

int64_t ParameterStore::scalar_count() const {
  int64_t n = 0;
  for (const auto& p : params_) n += p.var.value().numel();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

Var apply_dropout(const Var& x, double p, ForwardContext& ctx) {
  if (!ctx.training || p <= 0.0) return x;
  if (!ctx.rng) throw MisuseError("training forward pass requires a dropout generator");
  return dropout(x, p, *ctx.rng);
}

Tensor fan_in_uniform(Shape shape, int64_t fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

Tensor orthogonal_blocks(int64_t rows, int64_t cols, std::mt19937_64& rng) {
  if (cols <= 0 || rows % cols != 0) throw ConfigError("orthogonal_blocks: rows must be a multiple of cols");
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor out({rows, cols});
  for (int64_t block = 0; block < rows / cols; ++block) {
    detail::RowMat a(cols, cols);
    for (int64_t i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
    Eigen::HouseholderQR<detail::RowMat> qr(a);
    detail::RowMat q = qr.householderQ();
    // Sign fix makes Q uniformly distributed (Haar).
    detail::RowMat r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int64_t j = 0; j < cols; ++j) {
      if (r(j, j) < 0) q.col(j) *= -1.0;
    }
    detail::MatMap(out.data() + block * cols * cols, cols, cols) = q;
  }
  return out;
}

Linear::Linear(ParameterStore& store, const std::string& name, int64_t in, int64_t out,
               std::mt19937_64& rng, bool bias) {
  weight_ = store.add(name + ".weight", fan_in_uniform({out, in}, in, rng));
  if (bias) bias_ = store.add(name + ".bias", Tensor({out}));
}

Conv1d::Conv1d(ParameterStore& store, const std::string& name, int64_t in, int64_t out, int64_t kernel,
               Conv1dOptions opt, std::mt19937_64& rng, bool bias)
    : opt_(opt), kernel_(kernel) {
  weight_ = store.add(name + ".weight", fan_in_uniform({out, in, kernel}, in * kernel, rng));
  if (bias) bias_ = store.add(name + ".bias", Tensor({out}));
}

WeightNormConv1d::WeightNormConv1d(ParameterStore& store, const std::string& name, int64_t in,
                                   int64_t out, int64_t kernel, Conv1dOptions opt, std::mt19937_64& rng)
    : opt_(opt) {
  Tensor v = fan_in_uniform({out, in, kernel}, in * kernel, rng);
  Tensor g({out});
  const int64_t cols = in * kernel;
  for (int64_t o = 0; o < out; ++o) {
    double ss = 0.0;
    for (int64_t j = 0; j < cols; ++j) ss += v[o * cols + j] * v[o * cols + j];
    g[o] = std::sqrt(ss);
  }
  direction_ = store.add(name + ".weight_v", std::move(v));
  gain_ = store.add(name + ".weight_g", std::move(g));
  bias_ = store.add(name + ".bias", Tensor({out}));
}

BatchNorm1d::BatchNorm1d(ParameterStore& store, const std::string& name, int64_t channels) {
  gamma_ = store.add(name + ".weight", Tensor({channels}, 1.0));
  beta_ = store.add(name + ".bias", Tensor({channels}, 0.0));
  state_.running_mean = Tensor({channels}, 0.0);
  state_.running_var = Tensor({channels}, 1.0);
  store.add_buffer(name + ".running_mean", &state_.running_mean);
  store.add_buffer(name + ".running_var", &state_.running_var);
}

LstmStack::LstmStack(ParameterStore& store, const std::string& name, int64_t in, int64_t hidden,
                     int64_t layers, bool bidirectional, double dropout, std::mt19937_64& rng)
    : hidden_(hidden), bidirectional_(bidirectional), dropout_(dropout) {
  const int dirs = bidirectional ? 2 : 1;
  int64_t layer_in = in;
  for (int64_t l = 0; l < layers; ++l) {
    std::vector<Direction> dvec;
    for (int d = 0; d < dirs; ++d) {
      const std::string p =
          name + ".l" + std::to_string(l) + (d == 1 ? "_reverse" : "");
      Direction dir;
      dir.w_ih = store.add(p + ".weight_ih", fan_in_uniform({4 * hidden, layer_in}, layer_in, rng));
      dir.w_hh = store.add(p + ".weight_hh", orthogonal_blocks(4 * hidden, hidden, rng));
      dir.b_ih = store.add(p + ".bias_ih", Tensor({4 * hidden}));
      dir.b_hh = store.add(p + ".bias_hh", Tensor({4 * hidden}));
      dvec.push_back(dir);
    }
    layers_.push_back(std::move(dvec));
    layer_in = hidden * dirs;
  }
}

LstmStack::Output LstmStack::operator()(const Var& x, ForwardContext& ctx) const {
  Var seq = x;
  Output result;
  for (size_t l = 0; l < layers_.size(); ++l) {
    if (l > 0) seq = apply_dropout(seq, dropout_, ctx);
    const auto& fwd = layers_[l][0];
    Var out_f = lstm(seq, fwd.w_ih, fwd.w_hh, fwd.b_ih, fwd.b_hh, false);
    const int64_t last = out_f.value().dim(1) - 1;
    if (bidirectional_) {
      const auto& bwd = layers_[l][1];
      Var out_b = lstm(seq, bwd.w_ih, bwd.w_hh, bwd.b_ih, bwd.b_hh, true);
      if (l + 1 == layers_.size()) {
        result.final = concat_last(select_time(out_f, last), select_time(out_b, 0));
      }
      seq = concat_last(out_f, out_b);
    } else {
      if (l + 1 == layers_.size()) result.final = select_time(out_f, last);
      seq = out_f;
    }
  }
  result.sequence = seq;
  return result;
}

int64_t EcaBlock::adaptive_kernel(int64_t channels) {
  const double gamma = 2.0, b = 1.0;
  auto k = static_cast<int64_t>(std::abs(std::log2(static_cast<double>(channels)) / gamma + b / gamma));
  if (k % 2 == 0) k += 1;
  return std::max<int64_t>(k, 3);
}

EcaBlock::EcaBlock(ParameterStore& store, const std::string& name, int64_t channels, std::mt19937_64& rng)
    : kernel_size_(adaptive_kernel(channels)) {
  kernel_ = store.add(name + ".conv.weight", fan_in_uniform({kernel_size_}, kernel_size_, rng));
}

Var EcaBlock::gate(const Var& x) const { return sigmoid(channel_conv(mean_last(x), kernel_)); }

Var EcaBlock::operator()(const Var& x, bool bypass) const {
  if (bypass) return x;
  return scale_channels(x, gate(x));
}

}  // namespace gaitwave::nn
