#pragma once

#include <cmath>
#include <string>

#include "vimcan/autodiff/ops.hpp"
#include "vimcan/nn.hpp"

namespace vimcan::ssm {

using ad::Shape;
using ad::Tensor;

/// Parameters of one selective-scan direction over D channels with state
/// size N. The step-size projection is factored through a rank-r bottleneck:
/// the first r columns of `x_proj` feed `dt_proj`.
struct SsmParams {
  Tensor x_proj;   // [D, r + 2N] -> (dt_low, B, C)
  Tensor dt_proj;  // [r, D]
  Tensor dt_bias;  // [D]
  Tensor a_log;    // [D, N], A = -exp(a_log)
  Tensor d_skip;   // [D]

  std::size_t channels() const { return a_log.dim(0); }
  std::size_t state_size() const { return a_log.dim(1); }
  std::size_t dt_rank() const { return dt_proj.dim(0); }

  static std::size_t default_dt_rank(std::size_t channels) { return (channels + 15) / 16; }

  /// A spans -1..-N per channel; softplus(dt_bias) = 0.1.
  static SsmParams init(std::size_t channels, std::size_t state, nn::ParamInit& init,
                        std::size_t rank = 0) {
    if (rank == 0) rank = default_dt_rank(channels);
    std::vector<double> a(channels * state);
    for (std::size_t d = 0; d < channels; ++d)
      for (std::size_t n = 0; n < state; ++n) a[d * state + n] = std::log(static_cast<double>(n + 1));
    const double dt0 = 0.1;
    SsmParams p;
    p.x_proj = init.normal({channels, rank + 2 * state});
    p.dt_proj = init.normal({rank, channels});
    p.dt_bias = init.constant({channels}, std::log(std::expm1(dt0)));
    p.a_log = init.from({channels, state}, a);
    p.d_skip = init.constant({channels}, 1.0);
    return p;
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".x_proj", x_proj);
    f(prefix + ".dt_proj", dt_proj);
    f(prefix + ".dt_bias", dt_bias);
    f(prefix + ".a_log", a_log);
    f(prefix + ".d_skip", d_skip);
  }
};

/// The discretized recurrence with all per-step quantities supplied:
///   h_t = exp(delta_t * A) * h_{t-1} + delta_t * B_t * u_t,  h_0 = 0
///   y_t = <C_t, h_t> + d_skip * u_t
/// u, delta: [Bt, L, D]; A: [D, N]; B, C: [Bt, L, N]; d_skip: [D].
/// Hidden states are kept for the reverse pass only when recording.
inline Tensor scan_core(const Tensor& u, const Tensor& delta, const Tensor& A, const Tensor& B, const Tensor& C,
                        const Tensor& d_skip) {
  require(u.ndim() == 3, ErrorCode::ShapeMismatch, "scan input must be [batch, L, D]");
  const std::size_t nb = u.dim(0), L = u.dim(1), D = u.dim(2);
  require(L >= 1, ErrorCode::EmptySequence, "selective scan over empty sequence");
  require(A.ndim() == 2 && A.dim(0) == D, ErrorCode::ShapeMismatch, "A must be [D, N]");
  const std::size_t N = A.dim(1);
  require(delta.shape() == u.shape(), ErrorCode::ShapeMismatch, "delta shape");
  require(B.shape() == Shape{nb, L, N} && C.shape() == Shape{nb, L, N}, ErrorCode::ShapeMismatch, "B/C shape");
  require(d_skip.numel() == D, ErrorCode::ShapeMismatch, "d_skip extent");

  const bool record =
      ad::grad_enabled() && (u.requires_grad() || delta.requires_grad() || A.requires_grad() ||
                             B.requires_grad() || C.requires_grad() || d_skip.requires_grad());
  const auto& uv = u.node().value;
  const auto& dv = delta.node().value;
  const auto& av = A.node().value;
  const auto& bv = B.node().value;
  const auto& cv = C.node().value;
  const auto& sv = d_skip.node().value;

  ad::Buffer y(uv.size());
  ad::Buffer history(record ? nb * L * D * N : 0);
  ad::Buffer h(D * N);
  for (std::size_t b = 0; b < nb; ++b) {
    std::fill(h.begin(), h.end(), 0.0);
    for (std::size_t t = 0; t < L; ++t) {
      const std::size_t row = (b * L + t);
      const double* Bt = bv.data() + row * N;
      const double* Ct = cv.data() + row * N;
      for (std::size_t d = 0; d < D; ++d) {
        const double ut = uv[row * D + d];
        const double dt = dv[row * D + d];
        double acc = 0.0;
        double* hd = h.data() + d * N;
        for (std::size_t n = 0; n < N; ++n) {
          hd[n] = std::exp(dt * av[d * N + n]) * hd[n] + dt * Bt[n] * ut;
          acc += Ct[n] * hd[n];
        }
        y[row * D + d] = acc + sv[d] * ut;
      }
      if (record) std::copy(h.begin(), h.end(), history.begin() + static_cast<std::ptrdiff_t>(row * D * N));
    }
  }

  return ad::detail::make_result(
      u.shape(), std::move(y), {u, delta, A, B, C, d_skip},
      [nb, L, D, N, history = std::move(history)](ad::Node& self) {
        ad::Node& pu = *self.parents[0];
        ad::Node& pdl = *self.parents[1];
        ad::Node& pA = *self.parents[2];
        ad::Node& pB = *self.parents[3];
        ad::Node& pC = *self.parents[4];
        ad::Node& pS = *self.parents[5];
        const auto& G = self.grad;
        ad::Buffer gu(pu.value.size(), 0.0), gdl(pdl.value.size(), 0.0), gA(pA.value.size(), 0.0),
            gB(pB.value.size(), 0.0), gC(pC.value.size(), 0.0), gS(pS.value.size(), 0.0);
        ad::Buffer dh(D * N);
        for (std::size_t b = 0; b < nb; ++b) {
          std::fill(dh.begin(), dh.end(), 0.0);
          for (std::size_t t = L; t-- > 0;) {
            const std::size_t row = b * L + t;
            const double* Hs = history.data() + row * D * N;
            const double* Hp = t > 0 ? history.data() + (row - 1) * D * N : nullptr;
            const double* Bt = pB.value.data() + row * N;
            const double* Ct = pC.value.data() + row * N;
            for (std::size_t d = 0; d < D; ++d) {
              const double gy = G[row * D + d];
              const double ut = pu.value[row * D + d];
              const double dt = pdl.value[row * D + d];
              gS[d] += gy * ut;
              double gut = gy * pS.value[d];
              double gdt = 0.0;
              for (std::size_t n = 0; n < N; ++n) {
                const double a = pA.value[d * N + n];
                const double abar = std::exp(dt * a);
                const double hprev = Hp ? Hp[d * N + n] : 0.0;
                gC[row * N + n] += gy * Hs[d * N + n];
                double& g = dh[d * N + n];
                g += gy * Ct[n];
                const double g_abar = g * hprev;
                gdt += g_abar * abar * a + g * Bt[n] * ut;
                gA[d * N + n] += g_abar * abar * dt;
                gB[row * N + n] += g * dt * ut;
                gut += g * dt * Bt[n];
                g *= abar;
              }
              gu[row * D + d] += gut;
              gdl[row * D + d] += gdt;
            }
          }
        }
        auto accumulate = [](ad::Node& p, const ad::Buffer& g) {
          if (!p.requires_grad) return;
          auto& dst = p.grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
        };
        accumulate(pu, gu);
        accumulate(pdl, gdl);
        accumulate(pA, gA);
        accumulate(pB, gB);
        accumulate(pC, gC);
        accumulate(pS, gS);
      },
      "selective_scan");
}

/// Selective scan of u: [Bt, L, D] with input-dependent step size, B and C.
inline Tensor selective_scan(const Tensor& u, const SsmParams& p) {
  require(u.ndim() == 3, ErrorCode::ShapeMismatch, "selective_scan input must be [batch, L, D]");
  require(u.dim(1) >= 1, ErrorCode::EmptySequence, "selective scan over empty sequence");
  require(u.dim(2) == p.channels(), ErrorCode::ShapeMismatch,
          "selective_scan channels " + std::to_string(u.dim(2)) + " vs params " + std::to_string(p.channels()));
  const std::size_t r = p.dt_rank(), N = p.state_size();
  const Tensor proj = ad::matmul(u, p.x_proj);
  const Tensor dt_low = ad::slice(proj, -1, 0, r);
  const Tensor Bm = ad::slice(proj, -1, r, N);
  const Tensor Cm = ad::slice(proj, -1, r + N, N);
  const Tensor delta = ad::softplus(ad::add(ad::matmul(dt_low, p.dt_proj), p.dt_bias));
  const Tensor A = ad::scale(ad::exp(p.a_log), -1.0);
  return scan_core(u, delta, A, Bm, Cm, p.d_skip);
}

}  // namespace vimcan::ssm
