#include "gaitwave/nn/ops.hpp"

#include <algorithm>
#include <cmath>

#include "eigen_maps.hpp"
#include "gaitwave/errors.hpp"

namespace gaitwave::nn {

using detail::ConstMatMap;
using detail::MatMap;
using detail::RowMat;

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                      " vs " + shape_str(b.shape()));
}

// Shared body for pointwise unary ops: dy/dx is computed from (x, y).
template <class Fwd, class Deriv>
Var unary(const Var& a, Fwd fwd, Deriv deriv) {
  Tensor out(a.shape());
  const auto& x = a.value();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = fwd(x[i]);
  Tensor saved = out;
  return make_result(std::move(out), {a}, [deriv, saved = std::move(saved)](Node& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * deriv(in.value[i], saved[i]);
  });
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  out.add_inplace(b.value());
  return make_result(std::move(out), {a, b}, [](Node& self) {
    self.inputs[0]->accumulate(self.grad);
    self.inputs[1]->accumulate(self.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    auto& x = *self.inputs[0];
    auto& y = *self.inputs[1];
    if (x.requires_grad) {
      auto& g = x.grad_buffer();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * y.value[i];
    }
    if (y.requires_grad) {
      auto& g = y.grad_buffer();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * x.value[i];
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  for (auto& v : out.values()) v *= s;
  return make_result(std::move(out), {a}, [s](Node& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += s * self.grad[i];
  });
}

Var relu(const Var& a) {
  return unary(
      a, [](double x) { return (x > 0.0 || std::isnan(x)) ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(const Var& a) {
  return unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(const Var& a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var dropout(const Var& a, double p, std::mt19937_64& rng) {
  if (p <= 0.0) return a;
  if (p >= 1.0) throw ParameterError("dropout probability must be < 1");
  std::bernoulli_distribution keep(1.0 - p);
  const double inv = 1.0 / (1.0 - p);
  Tensor mask(a.shape());
  for (auto& m : mask.values()) m = keep(rng) ? inv : 0.0;
  Tensor out = a.value();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] *= mask[i];
  return make_result(std::move(out), {a}, [mask = std::move(mask)](Node& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * mask[i];
  });
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return make_result(std::move(out), {a}, [](Node& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  require(weight.value().rank() == 2, "linear: weight must be rank 2");
  const int64_t out_dim = weight.value().dim(0);
  const int64_t in_dim = weight.value().dim(1);
  require(x.value().rank() >= 1 && x.value().dim(-1) == in_dim,
          "linear: input " + shape_str(x.shape()) + " incompatible with weight " +
              shape_str(weight.shape()));
  const bool has_bias = bias.defined();
  if (has_bias) require(bias.value().numel() == out_dim, "linear: bias size mismatch");
  const int64_t rows = x.value().numel() / in_dim;

  Shape out_shape = x.shape();
  out_shape.back() = out_dim;
  Tensor out(out_shape);
  MatMap y(out.data(), rows, out_dim);
  ConstMatMap xm(x.value().data(), rows, in_dim);
  ConstMatMap wm(weight.value().data(), out_dim, in_dim);
  y.noalias() = xm * wm.transpose();
  if (has_bias) {
    Eigen::Map<const Eigen::RowVectorXd> bv(bias.value().data(), out_dim);
    y.rowwise() += bv;
  }

  std::vector<Var> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return make_result(std::move(out), std::move(inputs), [rows, in_dim, out_dim, has_bias](Node& self) {
    ConstMatMap dy(self.grad.data(), rows, out_dim);
    auto& xn = *self.inputs[0];
    auto& wn = *self.inputs[1];
    if (xn.requires_grad) {
      MatMap dx(xn.grad_buffer().data(), rows, in_dim);
      dx.noalias() += dy * ConstMatMap(wn.value.data(), out_dim, in_dim);
    }
    if (wn.requires_grad) {
      MatMap dw(wn.grad_buffer().data(), out_dim, in_dim);
      dw.noalias() += dy.transpose() * ConstMatMap(xn.value.data(), rows, in_dim);
    }
    if (has_bias && self.inputs[2]->requires_grad) {
      Eigen::Map<Eigen::RowVectorXd> db(self.inputs[2]->grad_buffer().data(), out_dim);
      db += dy.colwise().sum();
    }
  });
}

int64_t conv1d_output_length(int64_t length, int64_t kernel, const Conv1dOptions& opt) {
  const int64_t span = opt.dilation * (kernel - 1) + 1;
  const int64_t padded = length + opt.pad_left + opt.pad_right;
  if (padded < span) return 0;
  return (padded - span) / opt.stride + 1;
}

namespace {

void im2col(const double* x, int64_t cin, int64_t t_in, int64_t kernel, int64_t t_out,
            const Conv1dOptions& opt, double* col) {
  for (int64_t ci = 0; ci < cin; ++ci) {
    const double* xr = x + ci * t_in;
    for (int64_t k = 0; k < kernel; ++k) {
      double* cr = col + (ci * kernel + k) * t_out;
      const int64_t offset = k * opt.dilation - opt.pad_left;
      for (int64_t t = 0; t < t_out; ++t) {
        const int64_t src = t * opt.stride + offset;
        cr[t] = (src >= 0 && src < t_in) ? xr[src] : 0.0;
      }
    }
  }
}

void col2im_add(const double* col, int64_t cin, int64_t t_in, int64_t kernel, int64_t t_out,
                const Conv1dOptions& opt, double* dx) {
  for (int64_t ci = 0; ci < cin; ++ci) {
    double* dr = dx + ci * t_in;
    for (int64_t k = 0; k < kernel; ++k) {
      const double* cr = col + (ci * kernel + k) * t_out;
      const int64_t offset = k * opt.dilation - opt.pad_left;
      for (int64_t t = 0; t < t_out; ++t) {
        const int64_t src = t * opt.stride + offset;
        if (src >= 0 && src < t_in) dr[src] += cr[t];
      }
    }
  }
}

}  // namespace

Var conv1d(const Var& x, const Var& weight, const Var& bias, const Conv1dOptions& opt) {
  require(x.value().rank() == 3, "conv1d: input must be [B, C, T], got " + shape_str(x.shape()));
  require(weight.value().rank() == 3, "conv1d: weight must be [Cout, Cin, K]");
  require(opt.stride >= 1 && opt.dilation >= 1 && opt.pad_left >= 0 && opt.pad_right >= 0,
          "conv1d: invalid stride/dilation/padding");
  const int64_t batch = x.value().dim(0);
  const int64_t cin = x.value().dim(1);
  const int64_t t_in = x.value().dim(2);
  const int64_t cout = weight.value().dim(0);
  const int64_t kernel = weight.value().dim(2);
  require(weight.value().dim(1) == cin, "conv1d: input has " + std::to_string(cin) +
                                            " channels, weight expects " +
                                            std::to_string(weight.value().dim(1)));
  const int64_t t_out = conv1d_output_length(t_in, kernel, opt);
  require(t_out >= 1, "conv1d: kernel span exceeds padded input length " + std::to_string(t_in));
  const bool has_bias = bias.defined();
  if (has_bias) require(bias.value().numel() == cout, "conv1d: bias size mismatch");

  const int64_t patch = cin * kernel;
  Tensor out({batch, cout, t_out});
  std::vector<double> col(static_cast<size_t>(patch * t_out));
  ConstMatMap wm(weight.value().data(), cout, patch);
  for (int64_t b = 0; b < batch; ++b) {
    im2col(x.value().data() + b * cin * t_in, cin, t_in, kernel, t_out, opt, col.data());
    MatMap ob(out.data() + b * cout * t_out, cout, t_out);
    ob.noalias() = wm * ConstMatMap(col.data(), patch, t_out);
    if (has_bias) {
      for (int64_t o = 0; o < cout; ++o) ob.row(o).array() += bias.value()[o];
    }
  }

  std::vector<Var> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return make_result(
      std::move(out), std::move(inputs),
      [=](Node& self) {
        auto& xn = *self.inputs[0];
        auto& wn = *self.inputs[1];
        const bool bias_grad = has_bias && self.inputs[2]->requires_grad;
        std::vector<double> col(static_cast<size_t>(patch * t_out));
        std::vector<double> dcol(static_cast<size_t>(patch * t_out));
        ConstMatMap wm(wn.value.data(), cout, patch);
        for (int64_t b = 0; b < batch; ++b) {
          ConstMatMap gb(self.grad.data() + b * cout * t_out, cout, t_out);
          if (wn.requires_grad) {
            im2col(xn.value.data() + b * cin * t_in, cin, t_in, kernel, t_out, opt, col.data());
            MatMap dw(wn.grad_buffer().data(), cout, patch);
            dw.noalias() += gb * ConstMatMap(col.data(), patch, t_out).transpose();
          }
          if (xn.requires_grad) {
            MatMap dc(dcol.data(), patch, t_out);
            dc.noalias() = wm.transpose() * gb;
            col2im_add(dcol.data(), cin, t_in, kernel, t_out, opt,
                       xn.grad_buffer().data() + b * cin * t_in);
          }
          if (bias_grad) {
            auto& db = self.inputs[2]->grad_buffer();
            for (int64_t o = 0; o < cout; ++o) db[o] += gb.row(o).sum();
          }
        }
      });
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BatchNormState& state, bool training) {
  require(x.value().rank() == 3, "batch_norm: input must be [B, C, T]");
  const int64_t batch = x.value().dim(0);
  const int64_t channels = x.value().dim(1);
  const int64_t steps = x.value().dim(2);
  require(gamma.value().numel() == channels && beta.value().numel() == channels,
          "batch_norm: affine parameter size mismatch");
  if (state.running_mean.numel() != channels) {
    state.running_mean = Tensor({channels}, 0.0);
    state.running_var = Tensor({channels}, 1.0);
  }
  const int64_t count = batch * steps;
  const auto& xv = x.value();
  auto at = [channels, steps](int64_t b, int64_t c) { return (b * channels + c) * steps; };

  Tensor mean({channels});
  Tensor invstd({channels});
  if (training) {
    require(count > 1, "batch_norm: training mode needs more than one value per channel");
    for (int64_t c = 0; c < channels; ++c) {
      double s = 0.0;
      for (int64_t b = 0; b < batch; ++b)
        for (int64_t t = 0; t < steps; ++t) s += xv[at(b, c) + t];
      const double m = s / static_cast<double>(count);
      double ss = 0.0;
      for (int64_t b = 0; b < batch; ++b)
        for (int64_t t = 0; t < steps; ++t) {
          const double d = xv[at(b, c) + t] - m;
          ss += d * d;
        }
      const double var = ss / static_cast<double>(count);
      mean[c] = m;
      invstd[c] = 1.0 / std::sqrt(var + state.eps);
      const double unbiased = ss / static_cast<double>(count - 1);
      state.running_mean[c] = (1.0 - state.momentum) * state.running_mean[c] + state.momentum * m;
      state.running_var[c] =
          (1.0 - state.momentum) * state.running_var[c] + state.momentum * unbiased;
    }
  } else {
    for (int64_t c = 0; c < channels; ++c) {
      mean[c] = state.running_mean[c];
      invstd[c] = 1.0 / std::sqrt(state.running_var[c] + state.eps);
    }
  }

  Tensor xhat(xv.shape());
  Tensor out(xv.shape());
  for (int64_t b = 0; b < batch; ++b)
    for (int64_t c = 0; c < channels; ++c)
      for (int64_t t = 0; t < steps; ++t) {
        const int64_t i = at(b, c) + t;
        xhat[i] = (xv[i] - mean[c]) * invstd[c];
        out[i] = gamma.value()[c] * xhat[i] + beta.value()[c];
      }

  return make_result(
      std::move(out), {x, gamma, beta},
      [=, xhat = std::move(xhat), invstd = std::move(invstd)](Node& self) {
        auto& xn = *self.inputs[0];
        auto& gn = *self.inputs[1];
        auto& bn = *self.inputs[2];
        const auto& dy = self.grad;
        for (int64_t c = 0; c < channels; ++c) {
          double sum_dy = 0.0;
          double sum_dy_xhat = 0.0;
          for (int64_t b = 0; b < batch; ++b)
            for (int64_t t = 0; t < steps; ++t) {
              const int64_t i = at(b, c) + t;
              sum_dy += dy[i];
              sum_dy_xhat += dy[i] * xhat[i];
            }
          if (gn.requires_grad) gn.grad_buffer()[c] += sum_dy_xhat;
          if (bn.requires_grad) bn.grad_buffer()[c] += sum_dy;
          if (!xn.requires_grad) continue;
          auto& dx = xn.grad_buffer();
          const double g = gn.value[c] * invstd[c];
          const double n = static_cast<double>(count);
          for (int64_t b = 0; b < batch; ++b)
            for (int64_t t = 0; t < steps; ++t) {
              const int64_t i = at(b, c) + t;
              if (training) {
                dx[i] += g * (dy[i] - sum_dy / n - xhat[i] * sum_dy_xhat / n);
              } else {
                dx[i] += g * dy[i];
              }
            }
        }
      });
}

Var weight_norm(const Var& v, const Var& g) {
  const int64_t rows = v.value().dim(0);
  require(g.value().numel() == rows, "weight_norm: gain size mismatch");
  const int64_t cols = v.value().numel() / rows;
  Tensor norms({rows});
  Tensor out(v.shape());
  for (int64_t r = 0; r < rows; ++r) {
    double ss = 0.0;
    for (int64_t j = 0; j < cols; ++j) ss += v.value()[r * cols + j] * v.value()[r * cols + j];
    norms[r] = std::sqrt(ss);
    require(norms[r] > 0.0, "weight_norm: zero direction vector");
    const double f = g.value()[r] / norms[r];
    for (int64_t j = 0; j < cols; ++j) out[r * cols + j] = f * v.value()[r * cols + j];
  }
  return make_result(std::move(out), {v, g}, [rows, cols, norms = std::move(norms)](Node& self) {
    auto& vn = *self.inputs[0];
    auto& gn = *self.inputs[1];
    for (int64_t r = 0; r < rows; ++r) {
      const double n = norms[r];
      double dot = 0.0;  // <dw, v/n>
      for (int64_t j = 0; j < cols; ++j) dot += self.grad[r * cols + j] * vn.value[r * cols + j] / n;
      if (gn.requires_grad) gn.grad_buffer()[r] += dot;
      if (vn.requires_grad) {
        auto& dv = vn.grad_buffer();
        const double f = gn.value[r] / n;
        for (int64_t j = 0; j < cols; ++j) {
          const int64_t i = r * cols + j;
          dv[i] += f * (self.grad[i] - dot * vn.value[i] / n);
        }
      }
    }
  });
}

Var swap_last_axes(const Var& x) {
  require(x.value().rank() == 3, "swap_last_axes: rank-3 input required");
  const int64_t b = x.value().dim(0), p = x.value().dim(1), q = x.value().dim(2);
  Tensor out({b, q, p});
  for (int64_t n = 0; n < b; ++n) {
    ConstMatMap src(x.value().data() + n * p * q, p, q);
    MatMap(out.data() + n * p * q, q, p) = src.transpose();
  }
  return make_result(std::move(out), {x}, [b, p, q](Node& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    for (int64_t n = 0; n < b; ++n) {
      MatMap(g.data() + n * p * q, p, q) += ConstMatMap(self.grad.data() + n * p * q, q, p).transpose();
    }
  });
}

Var mean_last(const Var& x) {
  require(x.value().rank() == 3, "mean_last: input must be [B, C, T]");
  const int64_t rows = x.value().dim(0) * x.value().dim(1);
  const int64_t steps = x.value().dim(2);
  Tensor out({x.value().dim(0), x.value().dim(1)});
  for (int64_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (int64_t t = 0; t < steps; ++t) s += x.value()[r * steps + t];
    out[r] = s / static_cast<double>(steps);
  }
  return make_result(std::move(out), {x}, [rows, steps](Node& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    for (int64_t r = 0; r < rows; ++r) {
      const double d = self.grad[r] / static_cast<double>(steps);
      for (int64_t t = 0; t < steps; ++t) g[r * steps + t] += d;
    }
  });
}

Var scale_channels(const Var& x, const Var& gate) {
  require(x.value().rank() == 3 && gate.value().rank() == 2 &&
              gate.value().dim(0) == x.value().dim(0) && gate.value().dim(1) == x.value().dim(1),
          "scale_channels: gate " + shape_str(gate.shape()) + " does not match input " +
              shape_str(x.shape()));
  const int64_t rows = gate.value().numel();
  const int64_t steps = x.value().dim(2);
  Tensor out = x.value();
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t t = 0; t < steps; ++t) out[r * steps + t] *= gate.value()[r];
  return make_result(std::move(out), {x, gate}, [rows, steps](Node& self) {
    auto& xn = *self.inputs[0];
    auto& gn = *self.inputs[1];
    for (int64_t r = 0; r < rows; ++r) {
      double acc = 0.0;
      for (int64_t t = 0; t < steps; ++t) {
        const int64_t i = r * steps + t;
        acc += self.grad[i] * xn.value[i];
        if (xn.requires_grad) xn.grad_buffer()[i] += self.grad[i] * gn.value[r];
      }
      if (gn.requires_grad) gn.grad_buffer()[r] += acc;
    }
  });
}

Var channel_conv(const Var& desc, const Var& kernel) {
  require(desc.value().rank() == 2, "channel_conv: descriptor must be [B, C]");
  const int64_t k = kernel.value().numel();
  require(k % 2 == 1, "channel_conv: kernel size must be odd");
  const int64_t batch = desc.value().dim(0);
  const int64_t channels = desc.value().dim(1);
  const int64_t half = (k - 1) / 2;
  Tensor out({batch, channels});
  for (int64_t b = 0; b < batch; ++b)
    for (int64_t c = 0; c < channels; ++c) {
      double s = 0.0;
      for (int64_t j = 0; j < k; ++j) {
        const int64_t src = c + j - half;
        if (src >= 0 && src < channels) s += kernel.value()[j] * desc.value()[b * channels + src];
      }
      out[b * channels + c] = s;
    }
  return make_result(std::move(out), {desc, kernel}, [=](Node& self) {
    auto& dn = *self.inputs[0];
    auto& kn = *self.inputs[1];
    for (int64_t b = 0; b < batch; ++b)
      for (int64_t c = 0; c < channels; ++c) {
        const double g = self.grad[b * channels + c];
        for (int64_t j = 0; j < k; ++j) {
          const int64_t src = c + j - half;
          if (src < 0 || src >= channels) continue;
          if (kn.requires_grad) kn.grad_buffer()[j] += g * dn.value[b * channels + src];
          if (dn.requires_grad) dn.grad_buffer()[b * channels + src] += g * kn.value[j];
        }
      }
  });
}

Var concat_last(const Var& a, const Var& b) {
  const int64_t da = a.value().dim(-1);
  const int64_t db = b.value().dim(-1);
  const int64_t rows = a.value().numel() / da;
  Shape sa = a.shape(), sb = b.shape();
  sa.pop_back();
  sb.pop_back();
  require(sa == sb, "concat_last: leading dimensions differ");
  Shape out_shape = a.shape();
  out_shape.back() = da + db;
  Tensor out(out_shape);
  for (int64_t r = 0; r < rows; ++r) {
    std::copy_n(a.value().data() + r * da, da, out.data() + r * (da + db));
    std::copy_n(b.value().data() + r * db, db, out.data() + r * (da + db) + da);
  }
  return make_result(std::move(out), {a, b}, [rows, da, db](Node& self) {
    auto& an = *self.inputs[0];
    auto& bn = *self.inputs[1];
    for (int64_t r = 0; r < rows; ++r) {
      const double* g = self.grad.data() + r * (da + db);
      if (an.requires_grad) {
        double* ga = an.grad_buffer().data() + r * da;
        for (int64_t j = 0; j < da; ++j) ga[j] += g[j];
      }
      if (bn.requires_grad) {
        double* gb = bn.grad_buffer().data() + r * db;
        for (int64_t j = 0; j < db; ++j) gb[j] += g[da + j];
      }
    }
  });
}

Var select_time(const Var& x, int64_t t) {
  require(x.value().rank() == 3, "select_time: input must be [B, T, D]");
  const int64_t batch = x.value().dim(0), steps = x.value().dim(1), d = x.value().dim(2);
  require(t >= 0 && t < steps, "select_time: index out of range");
  Tensor out({batch, d});
  for (int64_t b = 0; b < batch; ++b)
    std::copy_n(x.value().data() + (b * steps + t) * d, d, out.data() + b * d);
  return make_result(std::move(out), {x}, [=](Node& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    for (int64_t b = 0; b < batch; ++b)
      for (int64_t j = 0; j < d; ++j) g[(b * steps + t) * d + j] += self.grad[b * d + j];
  });
}

Var softmax_rows(const Var& x) {
  const int64_t cols = x.value().dim(-1);
  const int64_t rows = x.value().numel() / cols;
  Tensor out(x.shape());
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = x.value().data() + r * cols;
    double* yr = out.data() + r * cols;
    const double mx = *std::max_element(xr, xr + cols);
    double s = 0.0;
    for (int64_t j = 0; j < cols; ++j) s += (yr[j] = std::exp(xr[j] - mx));
    for (int64_t j = 0; j < cols; ++j) yr[j] /= s;
  }
  Tensor saved = out;
  return make_result(std::move(out), {x}, [rows, cols, saved = std::move(saved)](Node& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    auto& g = in.grad_buffer();
    for (int64_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (int64_t j = 0; j < cols; ++j) dot += self.grad[r * cols + j] * saved[r * cols + j];
      for (int64_t j = 0; j < cols; ++j) {
        const int64_t i = r * cols + j;
        g[i] += saved[i] * (self.grad[i] - dot);
      }
    }
  });
}

Var attention_pool(const Var& h, const Var& weights) {
  require(h.value().rank() == 3 && weights.value().rank() == 2 &&
              weights.value().dim(0) == h.value().dim(0) && weights.value().dim(1) == h.value().dim(1),
          "attention_pool: weights " + shape_str(weights.shape()) + " do not match " +
              shape_str(h.shape()));
  const int64_t batch = h.value().dim(0), steps = h.value().dim(1), d = h.value().dim(2);
  Tensor out({batch, d});
  for (int64_t b = 0; b < batch; ++b)
    for (int64_t t = 0; t < steps; ++t) {
      const double w = weights.value()[b * steps + t];
      const double* hr = h.value().data() + (b * steps + t) * d;
      for (int64_t j = 0; j < d; ++j) out[b * d + j] += w * hr[j];
    }
  return make_result(std::move(out), {h, weights}, [=](Node& self) {
    auto& hn = *self.inputs[0];
    auto& wn = *self.inputs[1];
    for (int64_t b = 0; b < batch; ++b)
      for (int64_t t = 0; t < steps; ++t) {
        const double* g = self.grad.data() + b * d;
        const int64_t base = (b * steps + t) * d;
        if (wn.requires_grad) {
          double acc = 0.0;
          for (int64_t j = 0; j < d; ++j) acc += g[j] * hn.value[base + j];
          wn.grad_buffer()[b * steps + t] += acc;
        }
        if (hn.requires_grad) {
          const double w = wn.value[b * steps + t];
          double* gh = hn.grad_buffer().data() + base;
          for (int64_t j = 0; j < d; ++j) gh[j] += w * g[j];
        }
      }
  });
}

Var soft_cross_entropy(const Var& logits, const Tensor& targets) {
  require(logits.value().rank() == 2 && targets.shape() == logits.shape(),
          "soft_cross_entropy: targets " + shape_str(targets.shape()) + " vs logits " +
              shape_str(logits.shape()));
  const int64_t batch = logits.value().dim(0), classes = logits.value().dim(1);
  Tensor probs(logits.shape());
  double loss = 0.0;
  for (int64_t b = 0; b < batch; ++b) {
    const double* z = logits.value().data() + b * classes;
    const double mx = *std::max_element(z, z + classes);
    double s = 0.0;
    for (int64_t k = 0; k < classes; ++k) s += std::exp(z[k] - mx);
    const double lse = mx + std::log(s);
    for (int64_t k = 0; k < classes; ++k) {
      probs[b * classes + k] = std::exp(z[k] - lse);
      loss -= targets[b * classes + k] * (z[k] - lse);
    }
  }
  loss /= static_cast<double>(batch);
  return make_result(Tensor({1}, {loss}), {logits},
                     [=, probs = std::move(probs), targets = targets](Node& self) {
                       auto& in = *self.inputs[0];
                       if (!in.requires_grad) return;
                       auto& g = in.grad_buffer();
                       const double scale = self.grad[0] / static_cast<double>(batch);
                       for (int64_t b = 0; b < batch; ++b) {
                         double mass = 0.0;
                         for (int64_t k = 0; k < classes; ++k) mass += targets[b * classes + k];
                         for (int64_t k = 0; k < classes; ++k) {
                           const int64_t i = b * classes + k;
                           g[i] += scale * (probs[i] * mass - targets[i]);
                         }
                       }
                     });
}

}  // namespace gaitwave::nn
