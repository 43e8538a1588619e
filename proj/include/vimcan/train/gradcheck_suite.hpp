#pragma once


#include <functional>
#include <random>
#include <string>
#include <vector>

#include "vimcan/autodiff/gradcheck.hpp"
#include "vimcan/fusion/cross_attention.hpp"
#include "vimcan/fusion/cross_mamba.hpp"
#include "vimcan/fusion/temporal_attention.hpp"
#include "vimcan/losses.hpp"
#include "vimcan/model/vimcan_model.hpp"
#include "vimcan/preprocess/synth.hpp"
#include "vimcan/ssm/blocks.hpp"
#include "vimcan/train/trainer.hpp"

// Gradient-check harnesses for every block type and the full model.
namespace vimcan::checks {

using ad::Tensor;

struct NamedResult {
  std::string name;
  ad::GradcheckResult result;
};

/// Fixed random readout so the scalar depends on every output element unevenly.
inline Tensor readout(const Tensor& y, std::uint64_t seed) {
  const Tensor w = ad::seeded_randn(y.shape(), seed, 1.0);
  return ad::sum(ad::mul(y, w));
}

/// Parameters of `m` after moving them off their initializer values. At init
/// the step sizes are small, so some scan coordinates have gradients near the
/// rounding noise of a difference quotient; generic values avoid that.
template <class Module>
std::vector<Tensor> collect(Module& m, std::uint64_t seed) {
  std::vector<Tensor> out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.3);
  m.visit("m", [&](const std::string& name, Tensor& t) {
    const bool dt_bias = name.ends_with(".dt_bias");
    for (double& v : t.mutable_data()) v = dt_bias ? g(rng) : v + g(rng);
    out.push_back(t);
  });
  return out;
}

inline Tensor input(ad::Shape s, std::uint64_t seed) { return ad::parameter(ad::seeded_randn(s, seed, 0.7)); }

inline ad::GradcheckResult check_scan(const ad::GradcheckOptions& o) {
  nn::ParamInit init(21);
  auto p = ssm::SsmParams::init(4, 3, init);
  const Tensor u = input({2, 6, 4}, 22);
  auto params = collect(p, 100);
  params.push_back(u);
  return ad::finite_diff_check([&] { return readout(ssm::selective_scan(u, p), 23); }, params, o);
}

inline ad::GradcheckResult check_bistssm(ssm::Axis axis, const ad::GradcheckOptions& o) {
  nn::ParamInit init(31);
  ssm::BlockConfig c;
  c.width = 4;
  c.state = 3;
  auto blk = ssm::BiSTSSMBlock::init(c, init);
  const Tensor x = input({1, 4, 3, 4}, 32);
  const std::vector<std::size_t> order = {2, 0, 1};
  auto params = collect(blk, 101);
  params.push_back(x);
  return ad::finite_diff_check([&] { return readout(blk.forward(x, axis, order), 33); }, params, o);
}

inline ad::GradcheckResult check_stmamba(ssm::Flavor flavor, const ad::GradcheckOptions& o) {
  nn::ParamInit init(41);
  ssm::BlockConfig c;
  c.width = 4;
  c.state = 2;
  auto blk = ssm::STMambaBlock::init(c, 3, flavor, {1, 2, 0}, init);
  const Tensor x = input({1, 3, 3, 4}, 42);
  auto params = collect(blk, 102);
  params.push_back(x);
  return ad::finite_diff_check([&] { return readout(blk.forward(x), 43); }, params, o);
}

inline ad::GradcheckResult check_cross_attention(const ad::GradcheckOptions& o) {
  nn::ParamInit init(51);
  auto ca = fusion::CrossAttention::init(4, 2, init);
  const Tensor v = input({1, 2, 3, 4}, 52);
  const Tensor i = input({1, 2, 2, 4}, 53);
  auto params = collect(ca, 103);
  params.push_back(v);
  params.push_back(i);
  return ad::finite_diff_check([&] { return readout(ca.forward(v, i), 54); }, params, o);
}

inline ad::GradcheckResult check_cross_mamba(const ad::GradcheckOptions& o) {
  nn::ParamInit init(61);
  auto cm = fusion::CrossMamba::init(4, 5, 2, 3, init);
  const Tensor v = input({1, 3, 3, 4}, 62);
  const Tensor i = input({1, 3, 2, 4}, 63);
  auto params = collect(cm, 104);
  params.push_back(v);
  params.push_back(i);
  return ad::finite_diff_check([&] { return readout(cm.forward(v, i), 64); }, params, o);
}

inline ad::GradcheckResult check_temporal_attention(const ad::GradcheckOptions& o) {
  nn::ParamInit init(71);
  auto ta = fusion::TemporalSelfAttention::init(4, 2, 2, init);
  const Tensor x = input({1, 5, 2, 4}, 72);
  auto params = collect(ta, 105);
  params.push_back(x);
  return ad::finite_diff_check([&] { return readout(ta.forward(x), 73); }, params, o);
}

/// Fourth-order stencil at a wide step: structurally zero gradients (key
/// biases under softmax, for one) otherwise show raw ulp(f)/eps noise.
inline ad::GradcheckOptions block_options() {
  ad::GradcheckOptions o;
  o.eps = 1e-3;
  o.stencil = 4;
  return o;
}

/// Every block type at small width, all coordinates.
inline std::vector<NamedResult> block_suite(const ad::GradcheckOptions& o = block_options()) {
  return {{"selective_scan", check_scan(o)},
          {"bistssm_spatial", check_bistssm(ssm::Axis::Spatial, o)},
          {"bistssm_temporal", check_bistssm(ssm::Axis::Temporal, o)},
          {"stmamba_skeleton", check_stmamba(ssm::Flavor::SkeletonAware, o)},
          {"stmamba_part", check_stmamba(ssm::Flavor::PartAware, o)},
          {"cross_attention", check_cross_attention(o)},
          {"cross_mamba", check_cross_mamba(o)},
          {"temporal_attention", check_temporal_attention(o)}};
}

/// Options for the full-model check: the loss is O(100) mm while some deep
/// scan parameters have gradients near the rounding noise of the difference
/// quotient, so the denominator floor scales with the largest gradient.
/// The fourth-order stencil lets h be large enough to keep that noise down
/// without the curvature error of a plain central difference.
inline ad::GradcheckOptions full_model_options() {
  ad::GradcheckOptions o;
  o.eps = 1e-4;
  o.stencil = 4;
  o.max_coords_per_tensor = 4;
  o.relative_floor = 1e-7;
  o.seed = 0;
  return o;
}

/// Full forward plus total loss at `cfg` on one synthetic clip of T frames.
/// The N-MPJPE scale is pinned at the base point since it is a constant for
/// differentiation.
inline ad::GradcheckResult check_full_model(const model::ModelConfig& cfg, std::size_t T,
                                            const ad::GradcheckOptions& o = full_model_options()) {
  auto m = model::init_model(cfg, 0);
  const auto s = preprocess::synth_sequence(3, T, 0.0);
  const auto b = train::stack_windows({s}, T);
  std::vector<double> scales;
  {
    ad::NoGradGuard ng;
    scales = loss::nmpjpe_scales(m.forward(b.keypoints, b.imus), b.gt);
  }
  const loss::LossWeights w;
  return ad::finite_diff_check(
      [&] { return loss::total_loss(m.forward(b.keypoints, b.imus), b.gt, w, &scales).total; }, m.parameters(), o);
}

}  // namespace vimcan::checks
