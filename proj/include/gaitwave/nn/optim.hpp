#pragma once

#include <vector>

#include "gaitwave/nn/layers.hpp"

namespace gaitwave::nn {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Parameters without a gradient in the current
// step are left untouched.
class Adam {
 public:
  Adam(const ParameterStore& store, AdamOptions opt = {});
  void step();

 private:
  std::vector<Var> params_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  AdamOptions opt_;
  int64_t t_ = 0;
};

}  // namespace gaitwave::nn
