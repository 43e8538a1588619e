#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <string>

#include "vimcan/preprocess/sequences.hpp"

namespace vimcan::preprocess {

struct Point2 {
  double x = 0.0, y = 0.0;
};

/// Named 2D detector landmarks of one frame, in pixels.
using RawLandmarks = std::map<std::string, Point2>;

/// Landmark copied directly into each non-composite joint.
inline const std::map<std::size_t, std::string>& direct_landmarks() {
  using namespace skeleton;
  static const std::map<std::size_t, std::string> m = {
      {RightUpLeg, "right_hip"},      {RightLeg, "right_knee"},      {RightFoot, "right_ankle"},
      {LeftUpLeg, "left_hip"},        {LeftLeg, "left_knee"},        {LeftFoot, "left_ankle"},
      {Head, "head"},                 {LeftArm, "left_shoulder"},    {LeftForeArm, "left_elbow"},
      {LeftHand, "left_wrist"},       {RightArm, "right_shoulder"},  {RightForeArm, "right_elbow"},
      {RightHand, "right_wrist"}};
  return m;
}

inline constexpr double kSpineRatio = 0.25;
inline constexpr double kSpine3Ratio = 0.75;
inline constexpr double kNeckRatio = 0.33;

inline Point2 lerp(Point2 a, Point2 b, double t) { return {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)}; }

/// The 17 model joints of one frame. Hips, Spine, Spine3 and Neck are
/// composites of hip/shoulder centres and the nose; the rest are copied.
inline std::array<Point2, skeleton::kNumJoints> derive_composite_joints(const RawLandmarks& lm) {
  auto get = [&](const std::string& name) {
    auto it = lm.find(name);
    require(it != lm.end(), ErrorCode::MissingLandmark, name);
    require(std::isfinite(it->second.x) && std::isfinite(it->second.y), ErrorCode::NonFiniteInput, name);
    return it->second;
  };
  using namespace skeleton;
  std::array<Point2, kNumJoints> j{};
  const Point2 hip_center = lerp(get("left_hip"), get("right_hip"), 0.5);
  const Point2 shoulder_center = lerp(get("left_shoulder"), get("right_shoulder"), 0.5);
  j[Hips] = hip_center;
  j[Spine] = lerp(hip_center, shoulder_center, kSpineRatio);
  j[Spine3] = lerp(hip_center, shoulder_center, kSpine3Ratio);
  j[Neck] = lerp(shoulder_center, get("nose"), kNeckRatio);
  for (const auto& [joint, name] : direct_landmarks()) j[joint] = get(name);
  return j;
}

/// Per frame: divide by max(bbox width, bbox height) of the 17 keypoints and
/// express relative to Hips. Input and output are T x 17 x 2.
inline KeypointSequence2D normalize_keypoints(const KeypointSequence2D& pixels) {
  using skeleton::kNumJoints;
  KeypointSequence2D out(pixels.frames);
  for (std::size_t t = 0; t < pixels.frames; ++t) {
    double xmin = pixels(t, 0, 0), xmax = xmin, ymin = pixels(t, 0, 1), ymax = ymin;
    for (std::size_t j = 0; j < kNumJoints; ++j) {
      require(std::isfinite(pixels(t, j, 0)) && std::isfinite(pixels(t, j, 1)), ErrorCode::NonFiniteInput,
              "keypoint frame " + std::to_string(t));
      xmin = std::min(xmin, pixels(t, j, 0));
      xmax = std::max(xmax, pixels(t, j, 0));
      ymin = std::min(ymin, pixels(t, j, 1));
      ymax = std::max(ymax, pixels(t, j, 1));
    }
    const double scale = std::max(xmax - xmin, ymax - ymin);
    require(scale > 0, ErrorCode::DegenerateFrame, "all keypoints coincide in frame " + std::to_string(t));
    const double hx = pixels(t, skeleton::Hips, 0), hy = pixels(t, skeleton::Hips, 1);
    for (std::size_t j = 0; j < kNumJoints; ++j) {
      out(t, j, 0) = (pixels(t, j, 0) - hx) / scale;
      out(t, j, 1) = (pixels(t, j, 1) - hy) / scale;
    }
  }
  return out;
}

/// Landmark frames -> normalized keypoint sequence.
inline KeypointSequence2D keypoints_from_landmarks(const std::vector<RawLandmarks>& frames) {
  KeypointSequence2D px(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const auto joints = derive_composite_joints(frames[t]);
    for (std::size_t j = 0; j < skeleton::kNumJoints; ++j) {
      px(t, j, 0) = joints[j].x;
      px(t, j, 1) = joints[j].y;
    }
  }
  return normalize_keypoints(px);
}

}  // namespace vimcan::preprocess
