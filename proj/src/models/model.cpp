#include <random>
#include <set>
#include <sstream>

#include "factories.hpp"
#include "gaitwave/errors.hpp"
#include "gaitwave/models.hpp"

namespace gaitwave {

namespace {

struct FamilyName {
  Family family;
  const char* name;
};

constexpr FamilyName kFamilyNames[] = {
    {Family::lstm_humanfi, "lstm_humanfi"},
    {Family::cnn_bilstm_temporal_attn, "cnn_bilstm_temporal_attn"},
    {Family::cnn_bilstm_dual_attn, "cnn_bilstm_dual_attn"},
    {Family::custom_resnet1d, "custom_resnet1d"},
    {Family::custom_eca_resnet1d, "custom_eca_resnet1d"},
    {Family::opt_resnet1d_jaril, "opt_resnet1d_jaril"},
    {Family::opt_eca_resnet1d_jaril, "opt_eca_resnet1d_jaril"},
    {Family::tcn, "tcn"},
};

bool is_resnet(Family f) {
  return f == Family::custom_resnet1d || f == Family::custom_eca_resnet1d ||
         f == Family::opt_resnet1d_jaril || f == Family::opt_eca_resnet1d_jaril;
}

std::string int_list(const std::vector<int64_t>& v) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  os << ']';
  return os.str();
}

std::string fmt_rate(double r) {
  std::ostringstream os;
  os << r;
  return os.str();
}

}  // namespace

std::string to_string(Family f) {
  for (const auto& fn : kFamilyNames)
    if (fn.family == f) return fn.name;
  return "unknown";
}

Family family_from_string(const std::string& s) {
  for (const auto& fn : kFamilyNames)
    if (s == fn.name) return fn.family;
  throw ConfigError("unknown model family '" + s + "'");
}

bool is_lstm_based(Family f) {
  return f == Family::lstm_humanfi || f == Family::cnn_bilstm_temporal_attn ||
         f == Family::cnn_bilstm_dual_attn;
}

int64_t ModelConfig::effective_base_width() const {
  if (base_width > 0) return base_width;
  switch (family) {
    case Family::opt_resnet1d_jaril:
      return 128;
    case Family::opt_eca_resnet1d_jaril:
      return 92;  // lands near the published 3.64M at C=52, K=20
    default:
      return 64;
  }
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (input_channels <= 0) fail("input_channels must be positive");
  if (num_classes < 2) fail("num_classes must be at least 2");
  if (input_length < 0) fail("input_length must be non-negative");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  switch (family) {
    case Family::lstm_humanfi:
    case Family::cnn_bilstm_temporal_attn:
    case Family::cnn_bilstm_dual_attn:
      if (hidden_dim <= 0 || num_layers <= 0) fail("hidden_dim and num_layers must be positive");
      if (family != Family::lstm_humanfi && input_length > 0 && input_length < 3)
        fail("conv stem kernel 3 exceeds window length " + std::to_string(input_length));
      break;
    case Family::tcn:
      if (channels.empty()) fail("tcn needs at least one channel width");
      for (auto c : channels)
        if (c <= 0) fail("tcn channel widths must be positive");
      if (kernel_size <= 0) fail("kernel_size must be positive");
      break;
    default:
      if (residual_layers.size() != 4) fail("residual layer list must have length 4");
      for (auto n : residual_layers)
        if (n <= 0) fail("residual layer counts must be positive");
      if (effective_base_width() <= 0) fail("base_width must be positive");
      if (input_length > 0 && input_length < 7)
        fail("stem kernel 7 exceeds window length " + std::to_string(input_length));
      break;
  }
}

std::string ModelConfig::describe() const {
  std::ostringstream os;
  switch (family) {
    case Family::tcn:
      os << int_list(channels) << ", kernel_size=" << kernel_size << ", DR=" << fmt_rate(dropout);
      break;
    case Family::lstm_humanfi:
      os << "hidden_dim=" << hidden_dim << ", layers=" << num_layers << ", DR=" << fmt_rate(dropout);
      if (bidirectional) os << ", BiDi";
      break;
    case Family::cnn_bilstm_temporal_attn:
      os << "hidden_dim=" << hidden_dim << ", layers=" << num_layers;
      break;
    case Family::cnn_bilstm_dual_attn:
      os << "lstm_units=" << hidden_dim << ", layers=" << num_layers;
      break;
    default:
      os << "layers=" << int_list(residual_layers);
      if (base_width > 0) os << ", width=" << base_width;
      break;
  }
  if (mixup && smoothing) {
    os << ", M + GS";
  } else if (mixup) {
    os << ", M";
  } else if (smoothing) {
    os << ", GS";
  }
  return os.str();
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"family", to_string(c.family)},
                     {"input_channels", c.input_channels},
                     {"num_classes", c.num_classes},
                     {"input_length", c.input_length},
                     {"hidden_dim", c.hidden_dim},
                     {"num_layers", c.num_layers},
                     {"bidirectional", c.bidirectional},
                     {"dropout", c.dropout},
                     {"residual_layers", c.residual_layers},
                     {"base_width", c.base_width},
                     {"channels", c.channels},
                     {"kernel_size", c.kernel_size},
                     {"mixup", c.mixup},
                     {"smoothing", c.smoothing}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  static const std::set<std::string> known{
      "family",          "input_channels", "num_classes", "input_length", "hidden_dim",
      "lstm_units",      "num_layers",     "bidirectional", "dropout",    "residual_layers",
      "base_width",      "channels",       "kernel_size", "mixup",        "smoothing"};
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown model config key '" + key + "'");
  }
  try {
    c = ModelConfig{};
    c.family = family_from_string(j.at("family").get<std::string>());
    c.input_channels = j.value("input_channels", c.input_channels);
    c.num_classes = j.value("num_classes", c.num_classes);
    c.input_length = j.value("input_length", c.input_length);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.hidden_dim = j.value("lstm_units", c.hidden_dim);
    c.num_layers = j.value("num_layers", c.num_layers);
    c.bidirectional = j.value("bidirectional", c.bidirectional);
    c.dropout = j.value("dropout", c.dropout);
    c.residual_layers = j.value("residual_layers", c.residual_layers);
    c.base_width = j.value("base_width", c.base_width);
    c.channels = j.value("channels", c.channels);
    c.kernel_size = j.value("kernel_size", c.kernel_size);
    c.mixup = j.value("mixup", c.mixup);
    c.smoothing = j.value("smoothing", c.smoothing);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid model config: ") + e.what());
  }
}

void Model::check_input(const nn::Var& x) const {
  const auto& s = x.shape();
  if (s.size() != 3 || s[2] != cfg_.input_channels || s[1] < 1) {
    throw DimensionError("model expects [B, L, " + std::to_string(cfg_.input_channels) + "], got " +
                         nn::shape_str(s));
  }
}

std::unique_ptr<Model> build_model(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), 0x1417u};
  std::mt19937_64 rng(seq);
  if (cfg.family == Family::tcn) return detail::make_tcn(cfg, rng);
  if (is_resnet(cfg.family)) return detail::make_resnet(cfg, rng);
  return detail::make_recurrent(cfg, rng);
}

int64_t count_params(const Model& m) { return m.store().scalar_count(); }

nn::Tensor forward(Model& m, const nn::Tensor& batch) {
  nn::NoGradGuard guard;
  nn::ForwardContext ctx;
  ctx.training = false;
  return m.forward(nn::Var(batch), ctx).value();
}

}  // namespace gaitwave
