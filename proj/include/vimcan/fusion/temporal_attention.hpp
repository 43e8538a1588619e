#pragma once

#include <cmath>
#include <string>

#include "vimcan/fusion/cross_attention.hpp"

namespace vimcan::fusion {

/// Temporal multi-head self-attention with the same residual/MLP wrapping as
/// a BiSTSSM block. Materializes the full T x T score matrix per token and
/// head; it exists as the quadratic-memory baseline for benchmarks.
struct TemporalSelfAttention {
  nn::LayerNorm norm;
  nn::Linear query;
  nn::Linear key;
  nn::Linear value;
  nn::Linear out_proj;
  nn::LayerNorm mlp_norm;
  nn::Mlp mlp;
  std::size_t heads = 8;

  std::size_t width() const { return query.in_features(); }

  static TemporalSelfAttention init(std::size_t width, std::size_t heads, std::size_t mlp_ratio,
                                    nn::ParamInit& init) {
    require(heads > 0 && width % heads == 0, ErrorCode::InvalidConfig, "heads must divide width");
    TemporalSelfAttention a;
    a.norm = nn::LayerNorm::init(width, init);
    a.query = nn::Linear::init(width, width, init);
    a.key = nn::Linear::init(width, width, init);
    a.value = nn::Linear::init(width, width, init);
    a.out_proj = nn::Linear::init(width, width, init);
    a.mlp_norm = nn::LayerNorm::init(width, init);
    a.mlp = nn::Mlp::init(width, mlp_ratio * width, init);
    a.heads = heads;
    return a;
  }

  /// x: [B, T, S, D]; each of the S tokens attends over its own T frames.
  Tensor forward(const Tensor& x) const {
    require(x.ndim() == 4 && x.dim(3) == width(), ErrorCode::ShapeMismatch, "temporal attention input");
    const Tensor seq = ad::permute(norm(x), {0, 2, 1, 3});  // [B, S, T, D]
    const Tensor qh = detail::split_heads(query(seq), heads);
    const Tensor kh = detail::split_heads(key(seq), heads);
    const Tensor vh = detail::split_heads(value(seq), heads);
    const double inv = 1.0 / std::sqrt(static_cast<double>(width() / heads));
    const Tensor w = ad::softmax_last(ad::scale(ad::matmul(qh, ad::permute(kh, {0, 1, 2, 4, 3})), inv));
    const Tensor ctx = ad::permute(detail::merge_heads(ad::matmul(w, vh)), {0, 2, 1, 3});
    const Tensor y = ad::add(out_proj(ctx), x);
    return ad::add(mlp(mlp_norm(y)), y);
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    norm.visit(prefix + ".norm", f);
    query.visit(prefix + ".query", f);
    key.visit(prefix + ".key", f);
    value.visit(prefix + ".value", f);
    out_proj.visit(prefix + ".out_proj", f);
    mlp_norm.visit(prefix + ".mlp_norm", f);
    mlp.visit(prefix + ".mlp", f);
  }
};

}  // namespace vimcan::fusion
