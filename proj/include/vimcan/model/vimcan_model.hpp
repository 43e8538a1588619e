#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vimcan/fusion/cross_attention.hpp"
#include "vimcan/fusion/cross_mamba.hpp"
#include "vimcan/model/config.hpp"
#include "vimcan/preprocess/sequences.hpp"
#include "vimcan/ssm/blocks.hpp"

namespace vimcan::model {

using ad::Tensor;

/// Per-group pipeline: inertial extractor, fusion, post-fusion STMamba and
/// the J_g * width -> D_g reduction.
struct GroupStage {
  skeleton::Group group;
  ssm::STMambaBlock inertial_extractor;
  std::optional<fusion::CrossAttention> cross_attention;
  std::optional<fusion::CrossMamba> cross_mamba;
  ssm::STMambaBlock post_fusion;
  nn::Linear reduce;

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    inertial_extractor.visit(prefix + ".inertial", f);
    if (cross_attention) cross_attention->visit(prefix + ".cross_attention", f);
    if (cross_mamba) cross_mamba->visit(prefix + ".cross_mamba", f);
    post_fusion.visit(prefix + ".post_fusion", f);
    reduce.visit(prefix + ".reduce", f);
  }
};

class VimcanModel {
 public:
  static VimcanModel init(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    VimcanModel m;
    m.cfg_ = cfg;
    m.partition_ = cfg.resolved_partition();
    m.order_ = skeleton::skeleton_scan_order(skeleton::default_topology());
    nn::ParamInit init(seed);
    const std::size_t de = cfg.embed_dim, dg = cfg.group_dim;
    const auto blk_e = cfg.block(de);

    m.visual_embed_ = nn::Linear::init(2, de, init);
    m.inertial_embed_ = nn::Linear::init(4, de, init);
    m.visual_extractor_ = ssm::STMambaBlock::init(blk_e, skeleton::kNumJoints, ssm::Flavor::SkeletonAware, m.order_, init);

    for (const auto& g : m.partition_.groups) {
      GroupStage st;
      st.group = g;
      st.inertial_extractor = ssm::STMambaBlock::init(blk_e, g.imus.size(), ssm::Flavor::PartAware, {}, init);
      std::size_t fused_width = de;
      if (cfg.fusion == FusionKind::CrossAttention) {
        st.cross_attention = fusion::CrossAttention::init(de, cfg.heads, init);
      } else {
        st.cross_mamba = fusion::CrossMamba::init(de, dg, cfg.state, cfg.kernel, init);
        fused_width = dg;
      }
      st.post_fusion = ssm::STMambaBlock::init(cfg.block(fused_width), g.joints.size(), ssm::Flavor::PartAware, {}, init);
      st.reduce = nn::Linear::init(g.joints.size() * fused_width, dg, init);
      m.groups_.push_back(std::move(st));
    }
    m.expand_ = nn::Linear::init(m.groups_.size() * dg, skeleton::kNumJoints * dg, init);
    for (std::size_t l = 0; l < cfg.global_blocks; ++l) {
      m.global_.push_back(
          ssm::STMambaBlock::init(cfg.block(dg), skeleton::kNumJoints, ssm::Flavor::SkeletonAware, m.order_, init));
    }
    m.head_norm_ = nn::LayerNorm::init(dg, init);
    m.head_ = nn::Linear::init(dg, 3, init);
    return m;
  }

  const ModelConfig& config() const { return cfg_; }
  const skeleton::GroupPartition& partition() const { return partition_; }
  const std::vector<std::size_t>& scan_order() const { return order_; }

  /// keypoints: [B, T, 17, 2]; imus: [B, T, 6, 4] -> root-relative [B, T, 17, 3] in mm.
  Tensor forward(const Tensor& keypoints, const Tensor& imus) const {
    require(keypoints.ndim() == 4 && keypoints.dim(2) == skeleton::kNumJoints && keypoints.dim(3) == 2,
            ErrorCode::ShapeMismatch, "keypoints must be [B, T, 17, 2], got " + ad::shape_str(keypoints.shape()));
    require(imus.ndim() == 4 && imus.dim(2) == skeleton::kNumImus && imus.dim(3) == 4, ErrorCode::ShapeMismatch,
            "imus must be [B, T, 6, 4], got " + ad::shape_str(imus.shape()));
    require(keypoints.dim(0) == imus.dim(0) && keypoints.dim(1) == imus.dim(1), ErrorCode::LengthMismatch,
            "keypoint and IMU sequences differ in batch or length");
    const std::size_t B = keypoints.dim(0), T = keypoints.dim(1);
    require(T <= cfg_.max_frames, ErrorCode::SequenceTooLong,
            std::to_string(T) + " frames exceeds " + std::to_string(cfg_.max_frames));
    const std::size_t dg = cfg_.group_dim;

    const Tensor visual = visual_extractor_.forward(visual_embed_(keypoints));
    const Tensor inertial = inertial_embed_(imus);

    std::vector<Tensor> reduced;
    reduced.reserve(groups_.size());
    for (const auto& st : groups_) {
      const Tensor yi = st.inertial_extractor.forward(ad::index_select(inertial, 2, st.group.imus));
      const Tensor yv = ad::index_select(visual, 2, st.group.joints);
      const Tensor fused = st.cross_attention ? st.cross_attention->forward(yv, yi) : st.cross_mamba->forward(yv, yi);
      const Tensor z = st.post_fusion.forward(fused);
      reduced.push_back(st.reduce(ad::reshape(z, {B, T, z.dim(2) * z.dim(3)})));
    }
    const Tensor global_in = expand_(ad::concat(reduced, 2));  // [B, T, 17 * D_g]
    Tensor h = ad::reshape(global_in, {B, T, skeleton::kNumJoints, dg});
    for (const auto& blk : global_) h = blk.forward(h);
    const Tensor pose = ad::scale(head_(head_norm_(h)), cfg_.output_scale);
    const Tensor root = ad::index_select(pose, 2, std::vector<std::size_t>(skeleton::kNumJoints, skeleton::Hips));
    return ad::sub(pose, root);
  }

  /// Single-sequence inference without graph recording.
  preprocess::PoseSequence3D predict(const preprocess::KeypointSequence2D& kps, const preprocess::ImuSequence& imu) const {
    require(kps.frames == imu.frames, ErrorCode::LengthMismatch, "keypoint and IMU sequences differ in length");
    require(kps.frames >= 2, ErrorCode::TooShort, "need at least 2 frames");
    ad::NoGradGuard guard;
    const std::size_t T = kps.frames;
    const Tensor out = forward(ad::new_tensor({1, T, skeleton::kNumJoints, 2}, kps.values),
                               ad::new_tensor({1, T, skeleton::kNumImus, 4}, imu.values));
    return preprocess::PoseSequence3D(T, out.to_vector());
  }

  template <class F>
  void visit(F&& f) {
    visual_embed_.visit("visual_embed", f);
    inertial_embed_.visit("inertial_embed", f);
    visual_extractor_.visit("visual_extractor", f);
    for (std::size_t g = 0; g < groups_.size(); ++g) groups_[g].visit("groups." + std::to_string(g), f);
    expand_.visit("expand", f);
    for (std::size_t l = 0; l < global_.size(); ++l) global_[l].visit("global." + std::to_string(l), f);
    head_norm_.visit("head.norm", f);
    head_.visit("head.proj", f);
  }

  std::vector<std::pair<std::string, Tensor>> named_parameters() {
    std::vector<std::pair<std::string, Tensor>> out;
    visit([&](const std::string& name, Tensor& t) { out.emplace_back(name, t); });
    return out;
  }

  std::vector<Tensor> parameters() {
    std::vector<Tensor> out;
    visit([&](const std::string&, Tensor& t) { out.push_back(t); });
    return out;
  }

  std::size_t count_params() const {
    std::size_t n = 0;
    const_cast<VimcanModel*>(this)->visit([&](const std::string&, Tensor& t) { n += t.numel(); });
    return n;
  }

  /// Independent copy of all parameter values.
  VimcanModel clone() const {
    VimcanModel c = *this;
    c.visit([](const std::string&, Tensor& t) { t = ad::parameter(ad::detach(t)); });
    return c;
  }

 private:
  ModelConfig cfg_;
  skeleton::GroupPartition partition_;
  std::vector<std::size_t> order_;
  nn::Linear visual_embed_;
  nn::Linear inertial_embed_;
  ssm::STMambaBlock visual_extractor_;
  std::vector<GroupStage> groups_;
  nn::Linear expand_;
  std::vector<ssm::STMambaBlock> global_;
  nn::LayerNorm head_norm_;
  nn::Linear head_;
};

inline VimcanModel init_model(const ModelConfig& cfg, std::uint64_t seed) { return VimcanModel::init(cfg, seed); }

inline std::size_t count_params(const VimcanModel& m) { return m.count_params(); }

}  // namespace vimcan::model
