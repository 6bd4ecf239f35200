#include <memory>
#include <vector>

#include "factories.hpp"
#include "gaitwave/errors.hpp"

namespace gaitwave::detail {

using nn::Var;

namespace {

// Two causal dilated convolutions with weight normalisation, each followed by
// ReLU and dropout, plus a residual connection (1x1 conv when widths differ).
class TemporalBlock {
 public:
  TemporalBlock(nn::ParameterStore& store, const std::string& name, int64_t in, int64_t out,
                int64_t kernel, int64_t dilation, double dropout, std::mt19937_64& rng)
      : dropout_(dropout) {
    const nn::Conv1dOptions causal{.dilation = dilation, .pad_left = (kernel - 1) * dilation};
    conv1_ = nn::WeightNormConv1d(store, name + ".conv1", in, out, kernel, causal, rng);
    conv2_ = nn::WeightNormConv1d(store, name + ".conv2", out, out, kernel, causal, rng);
    if (in != out) downsample_ = std::make_unique<nn::Conv1d>(store, name + ".downsample", in, out, 1,
                                                             nn::Conv1dOptions{}, rng);
  }

  Var operator()(const Var& x, nn::ForwardContext& ctx) const {
    Var y = nn::apply_dropout(nn::relu(conv1_(x)), dropout_, ctx);
    y = nn::apply_dropout(nn::relu(conv2_(y)), dropout_, ctx);
    Var res = downsample_ ? (*downsample_)(x) : x;
    return nn::relu(nn::add(y, res));
  }

 private:
  nn::WeightNormConv1d conv1_;
  nn::WeightNormConv1d conv2_;
  std::unique_ptr<nn::Conv1d> downsample_;
  double dropout_;
};

class Tcn final : public Model {
 public:
  Tcn(const ModelConfig& cfg, std::mt19937_64& rng) : Model(cfg) {
    int64_t in = cfg.input_channels;
    for (size_t i = 0; i < cfg.channels.size(); ++i) {
      blocks_.emplace_back(store_, "network." + std::to_string(i), in, cfg.channels[i], cfg.kernel_size,
                           int64_t{1} << i, cfg.dropout, rng);
      in = cfg.channels[i];
    }
    head_ = nn::Linear(store_, "fc", in, cfg.num_classes, rng);
  }

  Var features(const Var& x, nn::ForwardContext& ctx) const {
    check_input(x);
    Var y = nn::swap_last_axes(x);
    for (const auto& block : blocks_) y = block(y, ctx);
    return y;
  }

  Var forward(const Var& x, nn::ForwardContext& ctx) override {
    Var feats = features(x, ctx);  // [B, C, T]
    Var last = nn::select_time(nn::swap_last_axes(feats), feats.value().dim(2) - 1);
    return head_(last);
  }

 private:
  std::vector<TemporalBlock> blocks_;
  nn::Linear head_;
};

}  // namespace

std::unique_ptr<Model> make_tcn(const ModelConfig& cfg, std::mt19937_64& rng) {
  return std::make_unique<Tcn>(cfg, rng);
}

}  // namespace gaitwave::detail

namespace gaitwave {

nn::Var tcn_sequence_features(Model& m, const nn::Var& x, nn::ForwardContext& ctx) {
  auto* tcn = dynamic_cast<detail::Tcn*>(&m);
  if (!tcn) throw MisuseError("tcn_sequence_features requires a tcn model");
  return tcn->features(x, ctx);
}

}  // namespace gaitwave
