#pragma once

#include <cmath>
#include <string>

#include "vimcan/nn.hpp"

namespace vimcan::fusion {

using ad::Tensor;

namespace detail {

/// [B, T, S, H*dk] -> [B, T, H, S, dk]
inline Tensor split_heads(const Tensor& x, std::size_t heads) {
  const std::size_t B = x.dim(0), T = x.dim(1), S = x.dim(2), D = x.dim(3);
  return ad::permute(ad::reshape(x, {B, T, S, heads, D / heads}), {0, 1, 3, 2, 4});
}

/// [B, T, H, S, dk] -> [B, T, S, H*dk]
inline Tensor merge_heads(const Tensor& x) {
  const std::size_t B = x.dim(0), T = x.dim(1), H = x.dim(2), S = x.dim(3), dk = x.dim(4);
  return ad::reshape(ad::permute(x, {0, 1, 3, 2, 4}), {B, T, S, H * dk});
}

}  // namespace detail

/// Per-group multi-head cross-attention. Visual tokens query, inertial tokens
/// supply keys and values; attention is within each frame.
///   MHCA = out_proj(concat_h softmax(Q_h K_hᵀ / sqrt(d_k)) V_h)
///   Z    = LN(MHCA) + Q
struct CrossAttention {
  nn::Linear query;
  nn::Linear key;
  nn::Linear value;
  nn::Linear out_proj;
  nn::LayerNorm norm;
  std::size_t heads = 8;

  std::size_t width() const { return query.out_features(); }
  std::size_t key_width() const { return width() / heads; }

  static CrossAttention init(std::size_t width, std::size_t heads, nn::ParamInit& init) {
    require(heads > 0 && width % heads == 0, ErrorCode::InvalidConfig,
            "head count " + std::to_string(heads) + " must divide width " + std::to_string(width));
    CrossAttention ca;
    ca.query = nn::Linear::init(width, width, init);
    ca.key = nn::Linear::init(width, width, init);
    ca.value = nn::Linear::init(width, width, init);
    ca.out_proj = nn::Linear::init(width, width, init);
    ca.norm = nn::LayerNorm::init(width, init);
    ca.heads = heads;
    return ca;
  }

  struct Output {
    Tensor fused;    // [B, T, J, D]
    Tensor weights;  // [B, T, H, J, I]
  };

  Output forward_with_weights(const Tensor& visual, const Tensor& inertial) const {
    require(visual.ndim() == 4 && inertial.ndim() == 4, ErrorCode::ShapeMismatch,
            "cross-attention expects [B, T, tokens, D] inputs");
    require(visual.dim(0) == inertial.dim(0) && visual.dim(1) == inertial.dim(1), ErrorCode::ShapeMismatch,
            "visual and inertial batch/frames differ");
    require(visual.dim(3) == width() && inertial.dim(3) == width(), ErrorCode::ShapeMismatch,
            "cross-attention width " + std::to_string(width()));
    const Tensor q = query(visual);
    const Tensor qh = detail::split_heads(q, heads);
    const Tensor kh = detail::split_heads(key(inertial), heads);
    const Tensor vh = detail::split_heads(value(inertial), heads);
    const Tensor kt = ad::permute(kh, {0, 1, 2, 4, 3});
    const Tensor scores = ad::scale(ad::matmul(qh, kt), 1.0 / std::sqrt(static_cast<double>(key_width())));
    Tensor weights = ad::softmax_last(scores);
    const Tensor mhca = out_proj(detail::merge_heads(ad::matmul(weights, vh)));
    return {ad::add(norm(mhca), q), std::move(weights)};
  }

  Tensor forward(const Tensor& visual, const Tensor& inertial) const {
    return forward_with_weights(visual, inertial).fused;
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    query.visit(prefix + ".query", f);
    key.visit(prefix + ".key", f);
    value.visit(prefix + ".value", f);
    out_proj.visit(prefix + ".out_proj", f);
    norm.visit(prefix + ".norm", f);
  }
};

}  // namespace vimcan::fusion
