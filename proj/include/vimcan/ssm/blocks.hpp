#pragma once

#include <string>
#include <vector>

#include "vimcan/nn.hpp"
#include "vimcan/ssm/ss2d.hpp"

namespace vimcan::ssm {

inline constexpr std::size_t kMaxFrames = 81;

enum class Axis { Spatial, Temporal };

struct BlockConfig {
  std::size_t width = 64;      // D_e or D_g
  std::size_t expand = 1;      // D_inner = expand * width
  std::size_t state = 16;      // N
  std::size_t kernel = 3;      // DWConv taps
  std::size_t mlp_ratio = 2;   // MLP hidden = mlp_ratio * width
  std::size_t dt_rank = 0;     // 0 -> ceil(D_inner / 16)

  std::size_t inner() const { return expand * width; }
};

/// Gated bidirectional spatio-temporal SSM block:
///   Fx, Fz = chunk(in_proj(F))
///   Fx_ssm = LN(SS2D(SiLU(DWConv(Fx))))
///   Y_ssm  = out_proj(Fx_ssm * sigmoid(Fz)) + F
///   Y      = MLP(LN(Y_ssm)) + Y_ssm
struct BiSTSSMBlock {
  nn::Linear in_proj;  // D -> 2 D_inner
  Tensor conv_weight;  // [D_inner, k]
  Tensor conv_bias;    // [D_inner]
  DirectionalParams scans;
  nn::LayerNorm scan_norm;
  nn::Linear out_proj;  // D_inner -> D
  nn::LayerNorm mlp_norm;
  nn::Mlp mlp;

  std::size_t width() const { return out_proj.out_features(); }
  std::size_t inner() const { return out_proj.in_features(); }

  static BiSTSSMBlock init(const BlockConfig& c, nn::ParamInit& init) {
    const std::size_t di = c.inner();
    require(c.kernel % 2 == 1, ErrorCode::EvenKernel, "block kernel must be odd");
    BiSTSSMBlock b;
    b.in_proj = nn::Linear::init(c.width, 2 * di, init);
    // Small random taps around an identity centre tap.
    b.conv_weight = init.normal({di, c.kernel});
    for (std::size_t d = 0; d < di; ++d) b.conv_weight.mutable_data()[d * c.kernel + c.kernel / 2] += 1.0;
    b.conv_bias = init.constant({di}, 0.0);
    for (auto& s : b.scans) s = SsmParams::init(di, c.state, init, c.dt_rank);
    b.scan_norm = nn::LayerNorm::init(di, init);
    b.out_proj = nn::Linear::init(di, c.width, init);
    b.mlp_norm = nn::LayerNorm::init(c.width, init);
    b.mlp = nn::Mlp::init(c.width, c.mlp_ratio * c.width, init);
    return b;
  }

  Tensor forward(const Tensor& x, Axis axis, const std::vector<std::size_t>& spatial_order) const {
    require(x.ndim() == 4 && x.dim(3) == width(), ErrorCode::ShapeMismatch,
            "BiSTSSM expects [B, T, S, " + std::to_string(width()) + "], got " + ad::shape_str(x.shape()));
    check_permutation(spatial_order, x.dim(2));
    const std::size_t di = inner();
    const Tensor proj = in_proj(x);
    const Tensor fx = ad::slice(proj, -1, 0, di);
    const Tensor fz = ad::slice(proj, -1, di, di);

    Tensor local;
    if (axis == Axis::Temporal) {
      const Tensor seq = ad::permute(fx, {0, 2, 1, 3});
      local = ad::permute(ad::depthwise_conv1d(seq, conv_weight, &conv_bias), {0, 2, 1, 3});
    } else {
      const Tensor seq = ad::index_select(fx, 2, spatial_order);
      local = ad::index_select(ad::depthwise_conv1d(seq, conv_weight, &conv_bias), 2,
                               inverse_permutation(spatial_order));
    }
    const Tensor fx_ssm = scan_norm(ss2d(ad::silu(local), scans, spatial_order));
    const Tensor fy = ad::mul(fx_ssm, ad::sigmoid(fz));
    const Tensor y_ssm = ad::add(out_proj(fy), x);
    return ad::add(mlp(mlp_norm(y_ssm)), y_ssm);
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    in_proj.visit(prefix + ".in_proj", f);
    f(prefix + ".conv.weight", conv_weight);
    f(prefix + ".conv.bias", conv_bias);
    static constexpr const char* kDir[4] = {"spatial_fwd", "spatial_rev", "temporal_fwd", "temporal_rev"};
    for (std::size_t i = 0; i < 4; ++i) scans[i].visit(prefix + ".scan." + kDir[i], f);
    scan_norm.visit(prefix + ".scan_norm", f);
    out_proj.visit(prefix + ".out_proj", f);
    mlp_norm.visit(prefix + ".mlp_norm", f);
    mlp.visit(prefix + ".mlp", f);
  }
};

enum class Flavor { SkeletonAware, PartAware };

/// Spatial BiSTSSM then temporal BiSTSSM, with learnable spatial and temporal
/// positional encodings. Skeleton-aware blocks scan tokens in kinematic order;
/// part-aware blocks scan in index order.
struct STMambaBlock {
  nn::LayerNorm norm;
  Tensor pos_spatial;   // [S, D]
  Tensor pos_temporal;  // [T_max, D]
  BiSTSSMBlock spatial;
  BiSTSSMBlock temporal;
  Flavor flavor = Flavor::PartAware;
  std::vector<std::size_t> order;

  std::size_t tokens() const { return pos_spatial.dim(0); }
  std::size_t width() const { return pos_spatial.dim(1); }
  std::size_t max_frames() const { return pos_temporal.dim(0); }

  static STMambaBlock init(const BlockConfig& c, std::size_t tokens, Flavor flavor,
                           std::vector<std::size_t> skeleton_order, nn::ParamInit& init) {
    STMambaBlock m;
    m.norm = nn::LayerNorm::init(c.width, init);
    m.pos_spatial = init.normal({tokens, c.width});
    m.pos_temporal = init.normal({kMaxFrames, c.width});
    m.spatial = BiSTSSMBlock::init(c, init);
    m.temporal = BiSTSSMBlock::init(c, init);
    m.flavor = flavor;
    m.order = flavor == Flavor::SkeletonAware ? std::move(skeleton_order) : identity_order(tokens);
    check_permutation(m.order, tokens);
    return m;
  }

  Tensor forward(const Tensor& x) const {
    require(x.ndim() == 4, ErrorCode::ShapeMismatch, "STMamba expects [B, T, S, D]");
    const std::size_t T = x.dim(1), S = x.dim(2);
    require(T <= max_frames(), ErrorCode::SequenceTooLong,
            std::to_string(T) + " frames exceeds the maximum of " + std::to_string(max_frames()));
    require(S == tokens() && x.dim(3) == width(), ErrorCode::ShapeMismatch,
            "STMamba built for " + std::to_string(tokens()) + " tokens of width " + std::to_string(width()) +
                ", got " + ad::shape_str(x.shape()));
    Tensor h = norm(ad::add(x, pos_spatial));
    h = spatial.forward(h, Axis::Spatial, order);
    const Tensor pt = ad::reshape(ad::slice(pos_temporal, 0, 0, T), {T, 1, width()});
    h = ad::add(h, ad::index_select(pt, 1, std::vector<std::size_t>(S, 0)));
    return temporal.forward(h, Axis::Temporal, order);
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    norm.visit(prefix + ".norm", f);
    f(prefix + ".pos_spatial", pos_spatial);
    f(prefix + ".pos_temporal", pos_temporal);
    spatial.visit(prefix + ".spatial", f);
    temporal.visit(prefix + ".temporal", f);
  }
};

}  // namespace vimcan::ssm
