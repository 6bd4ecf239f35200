#pragma once

#include <random>
#include <string>
#include <vector>

#include "gaitwave/nn/ops.hpp"

namespace gaitwave::nn {

struct NamedParameter {
  std::string name;
  Var var;
};

struct NamedBuffer {
  std::string name;
  Tensor* tensor;
};

// Flat, ordered registry of trainable parameters and non-trainable buffers.
// Layers register themselves under a dotted prefix at construction.
class ParameterStore {
 public:
  Var add(const std::string& name, Tensor init);
  void add_buffer(const std::string& name, Tensor* tensor);

  const std::vector<NamedParameter>& parameters() const { return params_; }
  const std::vector<NamedBuffer>& buffers() const { return buffers_; }
  int64_t scalar_count() const;
  void zero_grad();

 private:
  std::vector<NamedParameter> params_;
  std::vector<NamedBuffer> buffers_;
};

// Per-call forward state: train/eval mode and the dropout stream.
struct ForwardContext {
  bool training = false;
  std::mt19937_64* rng = nullptr;
};

Var apply_dropout(const Var& x, double p, ForwardContext& ctx);

// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Tensor fan_in_uniform(Shape shape, int64_t fan_in, std::mt19937_64& rng);
// Stack of square orthogonal blocks of size cols x cols (rows % cols == 0).
Tensor orthogonal_blocks(int64_t rows, int64_t cols, std::mt19937_64& rng);

class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, int64_t in, int64_t out, std::mt19937_64& rng,
         bool bias = true);
  Var operator()(const Var& x) const { return linear(x, weight_, bias_); }

 private:
  Var weight_;
  Var bias_;
};

class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(ParameterStore& store, const std::string& name, int64_t in, int64_t out, int64_t kernel,
         Conv1dOptions opt, std::mt19937_64& rng, bool bias = true);
  Var operator()(const Var& x) const { return conv1d(x, weight_, bias_, opt_); }
  int64_t kernel() const { return kernel_; }

 private:
  Var weight_;
  Var bias_;
  Conv1dOptions opt_;
  int64_t kernel_ = 0;
};

// Convolution whose weight is reparameterised as g * v / ||v|| per output channel.
class WeightNormConv1d {
 public:
  WeightNormConv1d() = default;
  WeightNormConv1d(ParameterStore& store, const std::string& name, int64_t in, int64_t out,
                   int64_t kernel, Conv1dOptions opt, std::mt19937_64& rng);
  Var operator()(const Var& x) const { return conv1d(x, weight_norm(direction_, gain_), bias_, opt_); }

 private:
  Var direction_;
  Var gain_;
  Var bias_;
  Conv1dOptions opt_;
};

class BatchNorm1d {
 public:
  BatchNorm1d() = default;
  BatchNorm1d(ParameterStore& store, const std::string& name, int64_t channels);
  BatchNorm1d(const BatchNorm1d&) = delete;
  BatchNorm1d& operator=(const BatchNorm1d&) = delete;
  Var operator()(const Var& x, const ForwardContext& ctx) {
    return batch_norm(x, gamma_, beta_, state_, ctx.training);
  }

 private:
  Var gamma_;
  Var beta_;
  BatchNormState state_;
};

// Multi-layer (optionally bidirectional) LSTM over [B, T, In]. Dropout is
// applied to the outputs of every layer except the last, during training.
class LstmStack {
 public:
  LstmStack() = default;
  LstmStack(ParameterStore& store, const std::string& name, int64_t in, int64_t hidden, int64_t layers,
            bool bidirectional, double dropout, std::mt19937_64& rng);

  struct Output {
    Var sequence;  // [B, T, H * directions]
    Var final;     // [B, H * directions]: last step of each direction
  };
  Output operator()(const Var& x, ForwardContext& ctx) const;
  int64_t output_dim() const { return hidden_ * (bidirectional_ ? 2 : 1); }

 private:
  struct Direction {
    Var w_ih, w_hh, b_ih, b_hh;
  };
  std::vector<std::vector<Direction>> layers_;
  int64_t hidden_ = 0;
  bool bidirectional_ = false;
  double dropout_ = 0.0;
};

// Efficient channel attention: global average pool over time, a small 1-D
// convolution across the channel descriptor, sigmoid gate, channelwise scale.
class EcaBlock {
 public:
  EcaBlock() = default;
  EcaBlock(ParameterStore& store, const std::string& name, int64_t channels, std::mt19937_64& rng);
  // x [B, C, T]. With bypass the gate is forced to 1 (identity).
  Var operator()(const Var& x, bool bypass) const;
  Var gate(const Var& x) const;
  int64_t kernel_size() const { return kernel_size_; }

  // Adaptive kernel size |log2(C)/gamma + b/gamma| rounded to odd, with
  // gamma = 2, b = 1 and a floor of 3.
  static int64_t adaptive_kernel(int64_t channels);

 private:
  Var kernel_;
  int64_t kernel_size_ = 0;
};

}  // namespace gaitwave::nn
