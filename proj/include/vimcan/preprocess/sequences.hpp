#pragma once

#include <string>
#include <vector>

#include "vimcan/error.hpp"
#include "vimcan/skeleton.hpp"

namespace vimcan::preprocess {

/// Row-major T x rows x cols block of reals.
template <std::size_t Rows, std::size_t Cols>
struct FrameArray {
  static constexpr std::size_t kRows = Rows;
  static constexpr std::size_t kCols = Cols;
  static constexpr std::size_t kFrameSize = Rows * Cols;

  std::size_t frames = 0;
  std::vector<double> values;

  FrameArray() = default;
  explicit FrameArray(std::size_t t) : frames(t), values(t * kFrameSize, 0.0) {}
  FrameArray(std::size_t t, std::vector<double> v) : frames(t), values(std::move(v)) {
    require(values.size() == frames * kFrameSize, ErrorCode::ShapeMismatch,
            "expected " + std::to_string(frames * kFrameSize) + " values, got " + std::to_string(values.size()));
  }

  double& operator()(std::size_t t, std::size_t r, std::size_t c) { return values[(t * Rows + r) * Cols + c]; }
  double operator()(std::size_t t, std::size_t r, std::size_t c) const { return values[(t * Rows + r) * Cols + c]; }

  FrameArray window(std::size_t start, std::size_t length) const {
    require(start + length <= frames && length > 0, ErrorCode::ShapeMismatch, "window out of range");
    return FrameArray(length, std::vector<double>(values.begin() + static_cast<std::ptrdiff_t>(start * kFrameSize),
                                                  values.begin() + static_cast<std::ptrdiff_t>((start + length) * kFrameSize)));
  }

  bool operator==(const FrameArray&) const = default;
};

using KeypointSequence2D = FrameArray<skeleton::kNumJoints, 2>;  // normalized, root-relative
using ImuSequence = FrameArray<skeleton::kNumImus, 4>;           // unit quaternions (w, x, y, z)
using PoseSequence3D = FrameArray<skeleton::kNumJoints, 3>;      // root-relative, millimetres

struct Sequence {
  std::string id;
  KeypointSequence2D keypoints;
  ImuSequence imu;
  PoseSequence3D gt3d;

  std::size_t frames() const { return keypoints.frames; }

  void validate() const {
    require(keypoints.frames == imu.frames && imu.frames == gt3d.frames, ErrorCode::LengthMismatch,
            "sequence '" + id + "' modality lengths differ");
  }

  Sequence window(std::size_t start, std::size_t length) const {
    return {id, keypoints.window(start, length), imu.window(start, length), gt3d.window(start, length)};
  }

  bool operator==(const Sequence&) const = default;
};

}  // namespace vimcan::preprocess
