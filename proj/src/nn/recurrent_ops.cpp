#include <cmath>

#include "eigen_maps.hpp"
#include "gaitwave/errors.hpp"
#include "gaitwave/nn/ops.hpp"

namespace gaitwave::nn {

using detail::ConstMatMap;
using detail::MatMap;
using detail::RowMat;

namespace {

double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Var lstm(const Var& x, const Var& w_ih, const Var& w_hh, const Var& b_ih, const Var& b_hh,
         bool reverse) {
  if (x.value().rank() != 3) throw DimensionError("lstm: input must be [B, T, In]");
  const int64_t batch = x.value().dim(0);
  const int64_t steps = x.value().dim(1);
  const int64_t in_dim = x.value().dim(2);
  const int64_t gates = w_ih.value().dim(0);
  const int64_t hidden = gates / 4;
  if (gates != 4 * hidden || w_ih.value().dim(1) != in_dim || w_hh.value().dim(0) != gates ||
      w_hh.value().dim(1) != hidden || b_ih.value().numel() != gates || b_hh.value().numel() != gates) {
    throw DimensionError("lstm: input " + shape_str(x.shape()) + " incompatible with weights " +
                         shape_str(w_ih.shape()) + " / " + shape_str(w_hh.shape()));
  }

  // Input projections for every step at once: [B*T, 4H].
  RowMat pre = ConstMatMap(x.value().data(), batch * steps, in_dim) *
               ConstMatMap(w_ih.value().data(), gates, in_dim).transpose();
  for (int64_t g = 0; g < gates; ++g) pre.col(g).array() += b_ih.value()[g] + b_hh.value()[g];

  // Activated gates (i, f, g, o) and cell states per (b, t), stored in time order.
  Tensor acts({batch, steps, gates});
  Tensor cells({batch, steps, hidden});
  Tensor out({batch, steps, hidden});
  ConstMatMap whh(w_hh.value().data(), gates, hidden);
  RowMat h_prev = RowMat::Zero(batch, hidden);
  RowMat c_prev = RowMat::Zero(batch, hidden);
  RowMat z(batch, gates);
  for (int64_t s = 0; s < steps; ++s) {
    const int64_t t = reverse ? steps - 1 - s : s;
    z.noalias() = h_prev * whh.transpose();
    for (int64_t b = 0; b < batch; ++b) {
      const double* p = pre.data() + (b * steps + t) * gates;
      double* a = acts.data() + (b * steps + t) * gates;
      double* c = cells.data() + (b * steps + t) * hidden;
      double* h = out.data() + (b * steps + t) * hidden;
      for (int64_t j = 0; j < hidden; ++j) {
        const double ig = sigm(p[j] + z(b, j));
        const double fg = sigm(p[hidden + j] + z(b, hidden + j));
        const double gg = std::tanh(p[2 * hidden + j] + z(b, 2 * hidden + j));
        const double og = sigm(p[3 * hidden + j] + z(b, 3 * hidden + j));
        a[j] = ig;
        a[hidden + j] = fg;
        a[2 * hidden + j] = gg;
        a[3 * hidden + j] = og;
        c[j] = fg * c_prev(b, j) + ig * gg;
        h[j] = og * std::tanh(c[j]);
        c_prev(b, j) = c[j];
        h_prev(b, j) = h[j];
      }
    }
  }

  Tensor hs = out;
  return make_result(
      std::move(out), {x, w_ih, w_hh, b_ih, b_hh},
      [=, acts = std::move(acts), cells = std::move(cells), hs = std::move(hs)](Node& self) {
        auto& xn = *self.inputs[0];
        auto& wih = *self.inputs[1];
        auto& whh_n = *self.inputs[2];
        ConstMatMap whh(whh_n.value.data(), gates, hidden);
        RowMat dpre = RowMat::Zero(batch * steps, gates);
        RowMat dh_next = RowMat::Zero(batch, hidden);
        RowMat dc_next = RowMat::Zero(batch, hidden);
        RowMat dz(batch, gates);
        RowMat h_before(batch, hidden);
        for (int64_t s = steps - 1; s >= 0; --s) {
          const int64_t t = reverse ? steps - 1 - s : s;
          const int64_t t_prev = reverse ? t + 1 : t - 1;
          const bool has_prev = s > 0;
          for (int64_t b = 0; b < batch; ++b) {
            const double* a = acts.data() + (b * steps + t) * gates;
            const double* c = cells.data() + (b * steps + t) * hidden;
            const double* cp = has_prev ? cells.data() + (b * steps + t_prev) * hidden : nullptr;
            const double* hp = has_prev ? hs.data() + (b * steps + t_prev) * hidden : nullptr;
            const double* gout = self.grad.data() + (b * steps + t) * hidden;
            for (int64_t j = 0; j < hidden; ++j) {
              const double ig = a[j], fg = a[hidden + j], gg = a[2 * hidden + j], og = a[3 * hidden + j];
              const double tc = std::tanh(c[j]);
              const double dh = gout[j] + dh_next(b, j);
              const double dc = dh * og * (1.0 - tc * tc) + dc_next(b, j);
              const double c_before = cp ? cp[j] : 0.0;
              dz(b, j) = dc * gg * ig * (1.0 - ig);
              dz(b, hidden + j) = dc * c_before * fg * (1.0 - fg);
              dz(b, 2 * hidden + j) = dc * ig * (1.0 - gg * gg);
              dz(b, 3 * hidden + j) = dh * tc * og * (1.0 - og);
              dc_next(b, j) = dc * fg;
              h_before(b, j) = hp ? hp[j] : 0.0;
            }
            dpre.row(b * steps + t) = dz.row(b);
          }
          if (whh_n.requires_grad) {
            MatMap(whh_n.grad_buffer().data(), gates, hidden).noalias() += dz.transpose() * h_before;
          }
          dh_next.noalias() = dz * whh;
        }
        if (xn.requires_grad) {
          MatMap(xn.grad_buffer().data(), batch * steps, in_dim).noalias() +=
              dpre * ConstMatMap(wih.value.data(), gates, in_dim);
        }
        if (wih.requires_grad) {
          MatMap(wih.grad_buffer().data(), gates, in_dim).noalias() +=
              dpre.transpose() * ConstMatMap(xn.value.data(), batch * steps, in_dim);
        }
        Eigen::RowVectorXd dbias = dpre.colwise().sum();
        for (int k : {3, 4}) {
          auto& bn = *self.inputs[static_cast<size_t>(k)];
          if (!bn.requires_grad) continue;
          auto& g = bn.grad_buffer();
          for (int64_t j = 0; j < gates; ++j) g[j] += dbias[j];
        }
      });
}

}  // namespace gaitwave::nn
