#include "gaitwave/nn/optim.hpp"

#include <cmath>

namespace gaitwave::nn {

Adam::Adam(const ParameterStore& store, AdamOptions opt) : opt_(opt) {
  for (const auto& p : store.parameters()) {
    params_.push_back(p.var);
    m_.emplace_back(p.var.shape());
    v_.emplace_back(p.var.shape());
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i].has_grad()) continue;
    const Tensor& g = params_[i].grad();
    Tensor& w = params_[i].mutable_value();
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (int64_t k = 0; k < w.numel(); ++k) {
      m[k] = opt_.beta1 * m[k] + (1.0 - opt_.beta1) * g[k];
      v[k] = opt_.beta2 * v[k] + (1.0 - opt_.beta2) * g[k] * g[k];
      w[k] -= opt_.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + opt_.eps);
    }
  }
}

}  // namespace gaitwave::nn
