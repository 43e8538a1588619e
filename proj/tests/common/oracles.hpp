#pragma once

// Reference implementations written without the autodiff graph, used as
// oracles by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "vimcan/vimcan.hpp"

namespace oracle {

using vimcan::ad::Tensor;

inline double softplus(double x) { return x > 30 ? x : std::log1p(std::exp(x)); }

/// Plain-loop S6 recurrence on one sequence u[L][D] with raw parameter arrays.
inline std::vector<double> naive_scan(const std::vector<double>& u, std::size_t L, std::size_t D,
                                      const vimcan::ssm::SsmParams& p) {
  const std::size_t N = p.state_size(), r = p.dt_rank(), W = r + 2 * N;
  const auto xp = p.x_proj.data();
  const auto dtp = p.dt_proj.data();
  const auto dtb = p.dt_bias.data();
  const auto alog = p.a_log.data();
  const auto skip = p.d_skip.data();
  std::vector<double> y(L * D, 0.0);
  std::vector<std::vector<double>> h(D, std::vector<double>(N, 0.0));
  for (std::size_t t = 0; t < L; ++t) {
    std::vector<double> proj(W, 0.0);
    for (std::size_t c = 0; c < W; ++c)
      for (std::size_t d = 0; d < D; ++d) proj[c] += u[t * D + d] * xp[d * W + c];
    for (std::size_t d = 0; d < D; ++d) {
      double pre = dtb[d];
      for (std::size_t k = 0; k < r; ++k) pre += proj[k] * dtp[k * D + d];
      const double delta = softplus(pre);
      double out = skip[d] * u[t * D + d];
      for (std::size_t n = 0; n < N; ++n) {
        const double a = -std::exp(alog[d * N + n]);
        h[d][n] = std::exp(delta * a) * h[d][n] + delta * proj[r + n] * u[t * D + d];
        out += proj[r + N + n] * h[d][n];
      }
      y[t * D + d] = out;
    }
  }
  return y;
}

/// Random (not initializer-shaped) scan parameters so the oracle covers
/// generic values.
inline vimcan::ssm::SsmParams random_params(std::size_t D, std::size_t N, std::uint64_t seed) {
  vimcan::nn::ParamInit init(seed);
  auto p = vimcan::ssm::SsmParams::init(D, N, init);
  std::mt19937_64 rng(seed * 7919 + 1);
  std::normal_distribution<double> g(0.0, 0.5);
  std::uniform_real_distribution<double> un(-1.0, 1.0);
  for (double& v : p.x_proj.mutable_data()) v = g(rng);
  for (double& v : p.dt_proj.mutable_data()) v = g(rng);
  for (double& v : p.dt_bias.mutable_data()) v = un(rng) - 0.5;
  for (double& v : p.a_log.mutable_data()) v = 1.5 * un(rng);
  for (double& v : p.d_skip.mutable_data()) v = un(rng);
  return p;
}

inline std::vector<double> random_values(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = a.size() == b.size() ? 0.0 : INFINITY;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// One SS2D direction on x[B][T][S][D] built from naive_scan by explicit
/// index bookkeeping.
inline std::vector<double> naive_direction(const std::vector<double>& x, std::size_t B, std::size_t T, std::size_t S,
                                           std::size_t D, const vimcan::ssm::SsmParams& p, int dir,
                                           const std::vector<std::size_t>& order) {
  std::vector<double> out(x.size(), 0.0);
  auto at = [&](std::size_t b, std::size_t t, std::size_t s) { return ((b * T + t) * S + s) * D; };
  if (dir < 2) {
    std::vector<std::size_t> seq = order;
    if (dir == 1) std::reverse(seq.begin(), seq.end());
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t t = 0; t < T; ++t) {
        std::vector<double> u(S * D);
        for (std::size_t k = 0; k < S; ++k)
          for (std::size_t d = 0; d < D; ++d) u[k * D + d] = x[at(b, t, seq[k]) + d];
        const auto y = naive_scan(u, S, D, p);
        for (std::size_t k = 0; k < S; ++k)
          for (std::size_t d = 0; d < D; ++d) out[at(b, t, seq[k]) + d] = y[k * D + d];
      }
  } else {
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t s = 0; s < S; ++s) {
        std::vector<double> u(T * D);
        for (std::size_t k = 0; k < T; ++k) {
          const std::size_t t = dir == 3 ? T - 1 - k : k;
          for (std::size_t d = 0; d < D; ++d) u[k * D + d] = x[at(b, t, s) + d];
        }
        const auto y = naive_scan(u, T, D, p);
        for (std::size_t k = 0; k < T; ++k) {
          const std::size_t t = dir == 3 ? T - 1 - k : k;
          for (std::size_t d = 0; d < D; ++d) out[at(b, t, s) + d] = y[k * D + d];
        }
      }
  }
  return out;
}

/// Random rotation from a seeded unit quaternion.
inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  q.normalize();
  return q.toRotationMatrix();
}

}  // namespace oracle
