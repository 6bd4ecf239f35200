#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gaitwave/nn/layers.hpp"
#include "json.hpp"

namespace gaitwave {

enum class Family {
  lstm_humanfi,
  cnn_bilstm_temporal_attn,
  cnn_bilstm_dual_attn,
  custom_resnet1d,
  custom_eca_resnet1d,
  opt_resnet1d_jaril,
  opt_eca_resnet1d_jaril,
  tcn,
};

inline constexpr Family kAllFamilies[] = {
    Family::lstm_humanfi,     Family::cnn_bilstm_temporal_attn, Family::cnn_bilstm_dual_attn,
    Family::custom_resnet1d,  Family::custom_eca_resnet1d,      Family::opt_resnet1d_jaril,
    Family::opt_eca_resnet1d_jaril, Family::tcn,
};

std::string to_string(Family f);
Family family_from_string(const std::string& s);
bool is_lstm_based(Family f);

// Declarative architecture description. Fields that a family does not use are
// ignored by it; defaults follow the published configurations.
struct ModelConfig {
  Family family = Family::tcn;
  int64_t input_channels = 52;
  int64_t num_classes = 20;
  // Window length when known; enables the kernel-vs-window check at build time.
  int64_t input_length = 0;

  // Recurrent families. For cnn_bilstm_dual_attn, hidden_dim plays the role of lstm_units.
  int64_t hidden_dim = 64;
  int64_t num_layers = 1;
  bool bidirectional = false;
  double dropout = 0.0;

  // ResNet families. base_width 0 selects the family default.
  std::vector<int64_t> residual_layers{1, 1, 1, 1};
  int64_t base_width = 0;

  // TCN.
  std::vector<int64_t> channels{64, 128};
  int64_t kernel_size = 2;

  // Augmentations applied when this config is trained.
  bool mixup = false;
  bool smoothing = false;

  int64_t effective_base_width() const;
  void validate() const;
  // Short human-readable configuration string, e.g. "[64,128], kernel_size=2, DR=0.5, M".
  std::string describe() const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

// A parameterised map from a batch of windows [B, L, C] to logits [B, K].
class Model {
 public:
  explicit Model(ModelConfig cfg) : cfg_(std::move(cfg)) {}
  virtual ~Model() = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  virtual nn::Var forward(const nn::Var& x, nn::ForwardContext& ctx) = 0;

  const ModelConfig& config() const { return cfg_; }
  nn::ParameterStore& store() { return store_; }
  const nn::ParameterStore& store() const { return store_; }

  // Attention weights [B, T] of the most recent forward pass, when the family has them.
  virtual std::optional<nn::Tensor> last_attention() const { return std::nullopt; }
  // Forces every ECA gate to 1. Only meaningful for the ECA families.
  void set_eca_bypass(bool bypass) { eca_bypass_ = bypass; }

 protected:
  void check_input(const nn::Var& x) const;

  ModelConfig cfg_;
  nn::ParameterStore store_;
  bool eca_bypass_ = false;
};

std::unique_ptr<Model> build_model(const ModelConfig& cfg, uint64_t seed = 0);
int64_t count_params(const Model& m);
// Batch forward pass; inference mode (no dropout, running normalisation stats).
nn::Tensor forward(Model& m, const nn::Tensor& batch);

// Exposed for the causality property: the TCN's per-timestep features [B, C, T]
// before the classifier reads the last step.
nn::Var tcn_sequence_features(Model& m, const nn::Var& x, nn::ForwardContext& ctx);

}  // namespace gaitwave
