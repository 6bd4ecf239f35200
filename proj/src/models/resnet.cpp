#include <memory>
#include <vector>

#include "factories.hpp"
#include "gaitwave/errors.hpp"

namespace gaitwave::detail {

using nn::Var;

namespace {

// conv3 -> BN -> ReLU -> conv3 -> BN -> [ECA] -> + shortcut -> ReLU
class BasicBlock {
 public:
  BasicBlock(nn::ParameterStore& store, const std::string& name, int64_t in, int64_t out, int64_t stride,
             bool eca, std::mt19937_64& rng)
      : conv1_(store, name + ".conv1", in, out, 3, {.stride = stride, .pad_left = 1, .pad_right = 1}, rng,
               false),
        bn1_(store, name + ".bn1", out),
        conv2_(store, name + ".conv2", out, out, 3, {.pad_left = 1, .pad_right = 1}, rng, false),
        bn2_(store, name + ".bn2", out) {
    if (eca) eca_ = std::make_unique<nn::EcaBlock>(store, name + ".eca", out, rng);
    if (in != out || stride != 1) {
      proj_ = std::make_unique<nn::Conv1d>(store, name + ".downsample.0", in, out, 1,
                                           nn::Conv1dOptions{.stride = stride}, rng, false);
      proj_bn_ = std::make_unique<nn::BatchNorm1d>(store, name + ".downsample.1", out);
    }
  }

  Var operator()(const Var& x, nn::ForwardContext& ctx, bool eca_bypass) {
    Var y = nn::relu(bn1_(conv1_(x), ctx));
    y = bn2_(conv2_(y), ctx);
    if (eca_) y = (*eca_)(y, eca_bypass);
    Var shortcut = proj_ ? (*proj_bn_)((*proj_)(x), ctx) : x;
    return nn::relu(nn::add(y, shortcut));
  }

 private:
  nn::Conv1d conv1_;
  nn::BatchNorm1d bn1_;
  nn::Conv1d conv2_;
  nn::BatchNorm1d bn2_;
  std::unique_ptr<nn::EcaBlock> eca_;
  std::unique_ptr<nn::Conv1d> proj_;
  std::unique_ptr<nn::BatchNorm1d> proj_bn_;
};

// Stem (kernel 7, stride 1) + BN + ReLU, four stages with doubling widths,
// global average pooling and a linear classifier. Stage transitions use
// stride 2 for the JARIL variants and stride 1 for the custom variants.
class ResNet1d final : public Model {
 public:
  ResNet1d(const ModelConfig& cfg, std::mt19937_64& rng, bool eca, bool downsample_stages) : Model(cfg) {
    const int64_t base = cfg.effective_base_width();
    stem_ = std::make_unique<nn::Conv1d>(store_, "stem.conv", cfg.input_channels, base, 7,
                                         nn::Conv1dOptions{.pad_left = 3, .pad_right = 3}, rng, false);
    stem_bn_ = std::make_unique<nn::BatchNorm1d>(store_, "stem.bn", base);
    int64_t in = base;
    for (int stage = 0; stage < 4; ++stage) {
      const int64_t width = base << stage;
      for (int64_t b = 0; b < cfg.residual_layers[static_cast<size_t>(stage)]; ++b) {
        const int64_t stride = (downsample_stages && stage > 0 && b == 0) ? 2 : 1;
        blocks_.push_back(std::make_unique<BasicBlock>(
            store_, "layer" + std::to_string(stage + 1) + "." + std::to_string(b), in, width, stride, eca, rng));
        in = width;
      }
    }
    head_ = nn::Linear(store_, "fc", in, cfg.num_classes, rng);
  }

  Var forward(const Var& x, nn::ForwardContext& ctx) override {
    check_input(x);
    if (x.value().dim(1) < 7)
      throw DimensionError("stem kernel 7 exceeds window length " + std::to_string(x.value().dim(1)));
    Var y = nn::relu((*stem_bn_)((*stem_)(nn::swap_last_axes(x)), ctx));
    for (auto& block : blocks_) y = (*block)(y, ctx, eca_bypass_);
    return head_(nn::mean_last(y));
  }

 private:
  std::unique_ptr<nn::Conv1d> stem_;
  std::unique_ptr<nn::BatchNorm1d> stem_bn_;
  std::vector<std::unique_ptr<BasicBlock>> blocks_;
  nn::Linear head_;
};

}  // namespace

std::unique_ptr<Model> make_resnet(const ModelConfig& cfg, std::mt19937_64& rng) {
  switch (cfg.family) {
    case Family::custom_resnet1d:
      return std::make_unique<ResNet1d>(cfg, rng, false, false);
    case Family::custom_eca_resnet1d:
      return std::make_unique<ResNet1d>(cfg, rng, true, false);
    case Family::opt_resnet1d_jaril:
      return std::make_unique<ResNet1d>(cfg, rng, false, true);
    case Family::opt_eca_resnet1d_jaril:
      return std::make_unique<ResNet1d>(cfg, rng, true, true);
    default:
      throw ConfigError("not a residual family: " + to_string(cfg.family));
  }
}

}  // namespace gaitwave::detail
