#pragma once

#include <array>
#include <vector>

#include "vimcan/autodiff/ops.hpp"
#include "vimcan/skeleton.hpp"

namespace vimcan::loss {

using ad::Tensor;

/// Distal joints (feet, head, hands) weigh twice as much in the temporal
/// consistency term.
inline std::vector<double> default_joint_weights() {
  using namespace skeleton;
  std::vector<double> w(kNumJoints, 1.0);
  for (std::size_t j : {RightFoot, LeftFoot, Head, LeftHand, RightHand}) w[j] = 2.0;
  return w;
}

struct LossWeights {
  double mpjpe = 1.0;
  double nmpjpe = 0.5;
  double velocity = 20.0;
  double tc = 0.5;
  std::vector<double> joint_weights = default_joint_weights();

  void validate() const {
    require(mpjpe >= 0 && nmpjpe >= 0 && velocity >= 0 && tc >= 0, ErrorCode::InvalidConfig,
            "loss weights must be non-negative");
    for (double w : joint_weights) require(w > 0, ErrorCode::InvalidConfig, "joint weights must be positive");
  }
};

namespace detail {

inline void check_pose(const Tensor& x, const char* what) {
  require(x.ndim() == 4 && x.dim(3) == 3, ErrorCode::ShapeMismatch,
          std::string(what) + " must be [B, T, J, 3], got " + ad::shape_str(x.shape()));
}

inline void check_pair(const Tensor& pred, const Tensor& gt) {
  check_pose(pred, "prediction");
  require(pred.shape() == gt.shape(), ErrorCode::ShapeMismatch,
          "prediction " + ad::shape_str(pred.shape()) + " vs ground truth " + ad::shape_str(gt.shape()));
}

/// x[:, 1:] - x[:, :-1]
inline Tensor frame_diff(const Tensor& x) {
  const std::size_t T = x.dim(1);
  require(T >= 2, ErrorCode::TooShort, "velocity terms need at least 2 frames");
  return ad::sub(ad::slice(x, 1, 1, T - 1), ad::slice(x, 1, 0, T - 1));
}

}  // namespace detail

/// Mean per-joint Euclidean distance over batch, frames and joints.
inline Tensor mpjpe_loss(const Tensor& pred, const Tensor& gt) {
  detail::check_pair(pred, gt);
  return ad::mean(ad::norm_last(ad::sub(pred, gt)));
}

/// Least-squares scale per sequence: s_b = <gt_b, pred_b> / <gt_b, gt_b>.
inline std::vector<double> nmpjpe_scales(const Tensor& pred, const Tensor& gt) {
  detail::check_pair(pred, gt);
  const std::size_t B = pred.dim(0);
  const std::size_t per = pred.numel() / B;
  const auto p = pred.data();
  const auto g = gt.data();
  std::vector<double> scales(B);
  for (std::size_t b = 0; b < B; ++b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = b * per; i < (b + 1) * per; ++i) {
      num += g[i] * p[i];
      den += g[i] * g[i];
    }
    require(den > 0, ErrorCode::DegenerateGroundTruth, "ground truth of sequence " + std::to_string(b) + " is all zero");
    scales[b] = num / den;
  }
  return scales;
}

/// Mean Euclidean distance between s_b * gt and the prediction. The scales are
/// constants for differentiation; pass `fixed_scales` to pin them (otherwise
/// they are recomputed from the current prediction).
inline Tensor nmpjpe_loss(const Tensor& pred, const Tensor& gt, const std::vector<double>* fixed_scales = nullptr) {
  const std::vector<double> scales = fixed_scales ? *fixed_scales : nmpjpe_scales(pred, gt);
  detail::check_pair(pred, gt);
  const std::size_t B = pred.dim(0);
  require(scales.size() == B, ErrorCode::ShapeMismatch, "one scale per sequence");
  const std::size_t per = pred.numel() / B;
  std::vector<double> scaled(gt.data().begin(), gt.data().end());
  for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] *= scales[i / per];
  return ad::mean(ad::norm_last(ad::sub(ad::new_tensor(gt.shape(), scaled), pred)));
}

/// Mean Euclidean distance between predicted and true frame-to-frame velocities.
inline Tensor mpjve_loss(const Tensor& pred, const Tensor& gt) {
  detail::check_pair(pred, gt);
  return ad::mean(ad::norm_last(ad::sub(detail::frame_diff(pred), detail::frame_diff(gt))));
}

/// Weighted squared frame-to-frame displacement of the prediction.
inline Tensor tc_loss(const Tensor& pred, const std::vector<double>& joint_weights) {
  detail::check_pose(pred, "prediction");
  require(joint_weights.size() == pred.dim(2), ErrorCode::ShapeMismatch, "one TC weight per joint");
  const Tensor sq = ad::sum_axis(ad::square(detail::frame_diff(pred)), -1);  // [B, T-1, J]
  return ad::mean(ad::mul(sq, ad::new_tensor({joint_weights.size()}, joint_weights)));
}

struct LossTerms {
  Tensor total;
  double mpjpe = 0, nmpjpe = 0, velocity = 0, tc = 0;
};

inline LossTerms total_loss(const Tensor& pred, const Tensor& gt, const LossWeights& w,
                            const std::vector<double>* fixed_scales = nullptr) {
  w.validate();
  LossTerms out;
  const Tensor a = mpjpe_loss(pred, gt);
  const Tensor b = nmpjpe_loss(pred, gt, fixed_scales);
  const Tensor c = mpjve_loss(pred, gt);
  const Tensor d = tc_loss(pred, w.joint_weights);
  out.mpjpe = a.item();
  out.nmpjpe = b.item();
  out.velocity = c.item();
  out.tc = d.item();
  out.total = ad::add(ad::add(ad::add(ad::scale(a, w.mpjpe), ad::scale(b, w.nmpjpe)), ad::scale(c, w.velocity)),
                      ad::scale(d, w.tc));
  return out;
}

}  // namespace vimcan::loss
