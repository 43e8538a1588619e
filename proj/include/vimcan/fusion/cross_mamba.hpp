#pragma once

#include <string>

#include "vimcan/nn.hpp"
#include "vimcan/ssm/selective_scan.hpp"

namespace vimcan::fusion {

using ad::Tensor;

/// Scan-based alternative to cross-attention. Visual and (mapped) inertial
/// tokens are concatenated per frame, the whole T*(J+I) token stream is
/// scanned forward and backward, and the two halves are gated and projected
/// to the group width.
struct CrossMamba {
  nn::Linear inertial_map;  // inertial -> visual feature space
  nn::Linear visual_in;
  nn::Linear inertial_in;
  Tensor visual_conv;  // [D, k], along time
  Tensor visual_conv_bias;
  Tensor inertial_conv;
  Tensor inertial_conv_bias;
  ssm::SsmParams scan_fwd;
  ssm::SsmParams scan_rev;
  nn::Linear visual_gate;
  nn::Linear inertial_gate;
  nn::Linear out_proj;  // 2D -> D_g

  std::size_t width() const { return visual_in.in_features(); }
  std::size_t out_width() const { return out_proj.out_features(); }

  static CrossMamba init(std::size_t width, std::size_t out_width, std::size_t state, std::size_t kernel,
                         nn::ParamInit& init) {
    require(kernel % 2 == 1, ErrorCode::EvenKernel, "cross-mamba kernel must be odd");
    CrossMamba cm;
    cm.inertial_map = nn::Linear::init(width, width, init);
    cm.visual_in = nn::Linear::init(width, width, init);
    cm.inertial_in = nn::Linear::init(width, width, init);
    cm.visual_conv = init.normal({width, kernel});
    cm.visual_conv_bias = init.constant({width}, 0.0);
    cm.inertial_conv = init.normal({width, kernel});
    cm.inertial_conv_bias = init.constant({width}, 0.0);
    for (std::size_t d = 0; d < width; ++d) {
      cm.visual_conv.mutable_data()[d * kernel + kernel / 2] += 1.0;
      cm.inertial_conv.mutable_data()[d * kernel + kernel / 2] += 1.0;
    }
    cm.scan_fwd = ssm::SsmParams::init(width, state, init);
    cm.scan_rev = ssm::SsmParams::init(width, state, init);
    cm.visual_gate = nn::Linear::init(width, width, init);
    cm.inertial_gate = nn::Linear::init(width, width, init);
    cm.out_proj = nn::Linear::init(2 * width, out_width, init);
    return cm;
  }

  /// Forward plus reverse selective scan over seq: [B, L, D], summed.
  Tensor bidirectional_scan(const Tensor& seq) const {
    const Tensor fwd = ssm::selective_scan(seq, scan_fwd);
    const Tensor rev = ad::flip(ssm::selective_scan(ad::flip(seq, 1), scan_rev), 1);
    return ad::add(fwd, rev);
  }

  Tensor forward(const Tensor& visual, const Tensor& inertial) const {
    require(visual.ndim() == 4 && inertial.ndim() == 4, ErrorCode::ShapeMismatch,
            "cross-mamba expects [B, T, tokens, D] inputs");
    require(visual.dim(0) == inertial.dim(0) && visual.dim(1) == inertial.dim(1), ErrorCode::ShapeMismatch,
            "visual and inertial batch/frames differ");
    require(visual.dim(3) == width() && inertial.dim(3) == width(), ErrorCode::ShapeMismatch,
            "cross-mamba width " + std::to_string(width()));
    const std::size_t B = visual.dim(0), T = visual.dim(1), J = visual.dim(2), I = inertial.dim(2);
    const std::size_t D = width();

    const Tensor mapped = inertial_map(inertial);
    auto temporal_conv = [](const Tensor& x, const Tensor& w, const Tensor& b) {
      return ad::permute(ad::depthwise_conv1d(ad::permute(x, {0, 2, 1, 3}), w, &b), {0, 2, 1, 3});
    };
    const Tensor xv = temporal_conv(visual_in(visual), visual_conv, visual_conv_bias);
    const Tensor xi = temporal_conv(inertial_in(mapped), inertial_conv, inertial_conv_bias);

    const Tensor tokens = ad::concat({xv, xi}, 2);  // [B, T, J+I, D]
    const Tensor scanned =
        ad::reshape(bidirectional_scan(ad::reshape(tokens, {B, T * (J + I), D})), {B, T, J + I, D});
    const Tensor zv = ad::mul(ad::slice(scanned, 2, 0, J), ad::silu(visual_gate(visual)));
    const Tensor zi = ad::mul(ad::slice(scanned, 2, J, I), ad::silu(inertial_gate(mapped)));

    // Every visual token sees the pooled inertial summary of its frame.
    const Tensor pooled = ad::scale(ad::sum_axis(zi, 2, true), 1.0 / static_cast<double>(I));
    const Tensor spread = ad::index_select(pooled, 2, std::vector<std::size_t>(J, 0));
    return out_proj(ad::concat({zv, spread}, 3));
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    inertial_map.visit(prefix + ".inertial_map", f);
    visual_in.visit(prefix + ".visual_in", f);
    inertial_in.visit(prefix + ".inertial_in", f);
    f(prefix + ".visual_conv.weight", visual_conv);
    f(prefix + ".visual_conv.bias", visual_conv_bias);
    f(prefix + ".inertial_conv.weight", inertial_conv);
    f(prefix + ".inertial_conv.bias", inertial_conv_bias);
    scan_fwd.visit(prefix + ".scan_fwd", f);
    scan_rev.visit(prefix + ".scan_rev", f);
    visual_gate.visit(prefix + ".visual_gate", f);
    inertial_gate.visit(prefix + ".inertial_gate", f);
    out_proj.visit(prefix + ".out_proj", f);
  }
};

}  // namespace vimcan::fusion
