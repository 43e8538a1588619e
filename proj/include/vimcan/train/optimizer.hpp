#pragma once

#include <cmath>
#include <vector>

#include "vimcan/autodiff/tensor.hpp"

namespace vimcan::train {

using ad::Tensor;

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct OptimizerState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t step = 0;

  bool operator==(const OptimizerState&) const = default;
};

/// One AdamW update with decoupled weight decay, in place on parameter values:
///   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * theta
/// `grads[k]` is the gradient of `params[k]`.
inline void adamw_step(std::vector<Tensor>& params, const std::vector<std::vector<double>>& grads,
                       OptimizerState& st, double lr, const AdamWConfig& cfg) {
  require(params.size() == grads.size(), ErrorCode::ShapeMismatch, "one gradient per parameter");
  for (std::size_t k = 0; k < params.size(); ++k) {
    require(grads[k].size() == params[k].numel(), ErrorCode::ShapeMismatch,
            "gradient " + std::to_string(k) + " does not match its parameter");
    for (double g : grads[k])
      require(std::isfinite(g), ErrorCode::NonFiniteGradient, "gradient of parameter " + std::to_string(k));
  }
  if (st.m.empty()) {
    for (const auto& p : params) {
      st.m.emplace_back(p.numel(), 0.0);
      st.v.emplace_back(p.numel(), 0.0);
    }
  }
  require(st.m.size() == params.size(), ErrorCode::ShapeMismatch, "optimizer state belongs to another model");
  ++st.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto theta = params[k].mutable_data();
    auto& m = st.m[k];
    auto& v = st.v[k];
    const auto& g = grads[k];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mh = m[i] / bc1;
      const double vh = v[i] / bc2;
      theta[i] = theta[i] - lr * mh / (std::sqrt(vh) + cfg.eps) - lr * cfg.weight_decay * theta[i];
    }
  }
}

/// Scales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
inline double clip_global_norm(std::vector<std::vector<double>>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (double x : g) sq += x * x;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0) {
    const double s = max_norm / norm;
    for (auto& g : grads)
      for (double& x : g) x *= s;
  }
  return norm;
}

}  // namespace vimcan::train
