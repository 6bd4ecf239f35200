#include "factories.hpp"
#include "gaitwave/errors.hpp"

namespace gaitwave::detail {

using nn::Var;

namespace {

class LstmHumanFi final : public Model {
 public:
  LstmHumanFi(const ModelConfig& cfg, std::mt19937_64& rng) : Model(cfg) {
    lstm_ = nn::LstmStack(store_, "lstm", cfg.input_channels, cfg.hidden_dim, cfg.num_layers,
                          cfg.bidirectional, cfg.dropout, rng);
    head_ = nn::Linear(store_, "fc", lstm_.output_dim(), cfg.num_classes, rng);
  }

  Var forward(const Var& x, nn::ForwardContext& ctx) override {
    check_input(x);
    return head_(lstm_(x, ctx).final);
  }

 private:
  nn::LstmStack lstm_;
  nn::Linear head_;
};

// Conv stem -> (channel attention) -> BiLSTM -> temporal attention -> classifier.
class CnnBiLstmAttention final : public Model {
 public:
  CnnBiLstmAttention(const ModelConfig& cfg, std::mt19937_64& rng, bool channel_attention)
      : Model(cfg), channel_attention_(channel_attention) {
    const int64_t h = cfg.hidden_dim;
    stem_ = nn::Conv1d(store_, "stem", cfg.input_channels, h, 3, {.pad_left = 1, .pad_right = 1}, rng);
    if (channel_attention_) {
      squeeze_ = nn::Linear(store_, "channel_attn.fc1", h, h, rng);
      excite_ = nn::Linear(store_, "channel_attn.fc2", h, h, rng);
    }
    lstm_ = nn::LstmStack(store_, "lstm", h, h, cfg.num_layers, true, cfg.dropout, rng);
    score_ = nn::Linear(store_, "temporal_attn.score", lstm_.output_dim(), 1, rng);
    head_ = nn::Linear(store_, "fc", lstm_.output_dim(), cfg.num_classes, rng);
  }

  Var forward(const Var& x, nn::ForwardContext& ctx) override {
    check_input(x);
    const int64_t batch = x.value().dim(0);
    const int64_t steps = x.value().dim(1);
    if (steps < 3) throw DimensionError("conv stem kernel 3 exceeds window length " + std::to_string(steps));
    Var feats = nn::relu(stem_(nn::swap_last_axes(x)));  // [B, H, T]
    if (channel_attention_) {
      Var gate = nn::sigmoid(excite_(nn::relu(squeeze_(nn::mean_last(feats)))));
      feats = nn::scale_channels(feats, gate);
    }
    Var seq = lstm_(nn::swap_last_axes(feats), ctx).sequence;  // [B, T, 2H]
    Var scores = nn::reshape(score_(seq), {batch, steps});
    Var weights = nn::softmax_rows(scores);
    last_attention_ = weights.value();
    Var context = nn::attention_pool(seq, weights);
    return head_(nn::apply_dropout(context, cfg_.dropout, ctx));
  }

  std::optional<nn::Tensor> last_attention() const override { return last_attention_; }

 private:
  bool channel_attention_;
  nn::Conv1d stem_;
  nn::Linear squeeze_;
  nn::Linear excite_;
  nn::LstmStack lstm_;
  nn::Linear score_;
  nn::Linear head_;
  std::optional<nn::Tensor> last_attention_;
};

}  // namespace

std::unique_ptr<Model> make_recurrent(const ModelConfig& cfg, std::mt19937_64& rng) {
  switch (cfg.family) {
    case Family::lstm_humanfi:
      return std::make_unique<LstmHumanFi>(cfg, rng);
    case Family::cnn_bilstm_temporal_attn:
      return std::make_unique<CnnBiLstmAttention>(cfg, rng, false);
    case Family::cnn_bilstm_dual_attn:
      return std::make_unique<CnnBiLstmAttention>(cfg, rng, true);
    default:
      throw ConfigError("not a recurrent family: " + to_string(cfg.family));
  }
}

}  // namespace gaitwave::detail
