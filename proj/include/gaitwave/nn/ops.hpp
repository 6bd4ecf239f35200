#pragma once

#include <random>

#include "gaitwave/nn/autograd.hpp"

// Differentiable tensor operations. Sequence tensors are either time-major
// [B, T, C] (recurrent code) or channel-major [B, C, T] (convolutions); each
// op states which layout it expects.
namespace gaitwave::nn {

Var add(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
// Inverted dropout; identity when p == 0.
Var dropout(const Var& a, double p, std::mt19937_64& rng);
Var reshape(const Var& a, Shape shape);

// x [..., in], weight [out, in], bias [out] or undefined -> [..., out].
Var linear(const Var& x, const Var& weight, const Var& bias);

struct Conv1dOptions {
  int64_t stride = 1;
  int64_t dilation = 1;
  int64_t pad_left = 0;
  int64_t pad_right = 0;
};
int64_t conv1d_output_length(int64_t length, int64_t kernel, const Conv1dOptions& opt);
// x [B, Cin, T], weight [Cout, Cin, K], bias [Cout] or undefined -> [B, Cout, T'].
Var conv1d(const Var& x, const Var& weight, const Var& bias, const Conv1dOptions& opt);

struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double eps = 1e-5;
};
// x [B, C, T]; statistics over batch and time per channel.
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BatchNormState& state, bool training);

// v [Cout, ...], g [Cout] -> g[o] * v[o] / ||v[o]||.
Var weight_norm(const Var& v, const Var& g);

// [B, A, C] <-> [B, C, A].
Var swap_last_axes(const Var& x);
// [B, C, T] -> [B, C] mean over T.
Var mean_last(const Var& x);
// x [B, C, T] * gate [B, C] broadcast over T.
Var scale_channels(const Var& x, const Var& gate);
// desc [B, C], kernel [K] (odd): zero-padded cross-correlation along C.
Var channel_conv(const Var& desc, const Var& kernel);
// Concatenation along the last axis; leading dims must match.
Var concat_last(const Var& a, const Var& b);
// x [B, T, D] -> [B, D] at time t.
Var select_time(const Var& x, int64_t t);
// Softmax over the last axis of a rank-2 tensor.
Var softmax_rows(const Var& x);
// h [B, T, D], weights [B, T] -> sum_t weights[b,t] * h[b,t,:].
Var attention_pool(const Var& h, const Var& weights);
// Mean over the batch of -sum_k target[b,k] * log_softmax(logits)[b,k].
Var soft_cross_entropy(const Var& logits, const Tensor& targets);

// Single-direction LSTM over x [B, T, In] with PyTorch gate order (i, f, g, o)
// and separate input/hidden biases. Returns hidden states [B, T, H]; with
// reverse the sequence is consumed from t = T-1 down to 0.
Var lstm(const Var& x, const Var& w_ih, const Var& w_hh, const Var& b_ih, const Var& b_hh,
         bool reverse);

}  // namespace gaitwave::nn
