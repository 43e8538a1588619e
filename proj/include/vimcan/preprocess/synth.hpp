#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include "vimcan/autodiff/tensor.hpp"
#include "vimcan/preprocess/keypoints.hpp"
#include "vimcan/preprocess/quaternion.hpp"

namespace vimcan::preprocess {

/// Rest-pose offset of each joint from its parent, millimetres, y up.
inline const std::array<std::array<double, 3>, skeleton::kNumJoints>& rest_offsets() {
  static const std::array<std::array<double, 3>, skeleton::kNumJoints> o = {{
      {0, 0, 0},                                      // Hips
      {-90, 0, 0},     {0, -420, 0}, {0, -410, 0},    // right leg
      {90, 0, 0},      {0, -420, 0}, {0, -410, 0},    // left leg
      {0, 120, 0},     {0, 240, 0},  {0, 160, 0},  {0, 120, 0},  // spine .. head
      {170, 120, 0},   {280, 0, 0},  {250, 0, 0},     // left arm
      {-170, 120, 0},  {-280, 0, 0}, {-250, 0, 0},    // right arm
  }};
  return o;
}

struct SynthOptions {
  double max_amplitude = 0.25;   // radians per sinusoid
  double min_frequency = 0.02;   // radians per frame
  double max_frequency = 0.08;
};

/// Smooth articulated motion on the default topology with paired
/// observations. Joint angles are per-axis sums of up to three seeded
/// sinusoids; 2D keypoints are the orthographic (x, y) projection passed
/// through normalize_keypoints; IMU quaternions are the global orientations of
/// the six instrumented bones, optionally perturbed by random rotations with
/// angle ~ N(0, noise) radians.
inline Sequence synth_sequence(std::uint64_t seed, std::size_t frames, double noise,
                               const SynthOptions& opt = {}) {
  using namespace skeleton;
  require(frames >= 2, ErrorCode::InvalidArgument, "synth_sequence needs at least 2 frames");
  require(noise >= 0 && std::isfinite(noise), ErrorCode::InvalidArgument, "noise must be >= 0");
  const auto topo = default_topology();
  ad::GaussianStream rng(seed);

  struct Wave {
    double amp, freq, phase;
  };
  // [joint][axis] -> up to three sinusoids
  std::array<std::array<std::vector<Wave>, 3>, kNumJoints> waves;
  for (auto& joint : waves)
    for (auto& axis : joint) {
      const std::size_t count = 1 + static_cast<std::size_t>(rng.uniform() * 3.0) % 3;
      for (std::size_t k = 0; k < count; ++k) {
        axis.push_back({opt.max_amplitude * rng.uniform() / static_cast<double>(count),
                        opt.min_frequency + (opt.max_frequency - opt.min_frequency) * rng.uniform(),
                        6.283185307179586 * rng.uniform()});
      }
    }

  Sequence seq;
  seq.id = "synth-" + std::to_string(seed);
  seq.gt3d = PoseSequence3D(frames);
  seq.imu = ImuSequence(frames);
  KeypointSequence2D pixels(frames);

  const auto& offsets = rest_offsets();
  for (std::size_t t = 0; t < frames; ++t) {
    std::array<Quat, kNumJoints> global{};
    std::array<std::array<double, 3>, kNumJoints> pos{};
    for (std::size_t j = 0; j < kNumJoints; ++j) {  // parents precede children in index order
      std::array<double, 3> rv{};
      for (std::size_t a = 0; a < 3; ++a)
        for (const auto& w : waves[j][a]) rv[a] += w.amp * std::sin(w.freq * static_cast<double>(t) + w.phase);
      const Quat local = Quat::from_rotation_vector(rv[0], rv[1], rv[2]);
      if (topo.parent[j] == kRoot) {
        global[j] = local;
        pos[j] = {0, 0, 0};
      } else {
        const std::size_t p = topo.parent[j];
        global[j] = normalized(hamilton(global[p], local));
        const auto off = rotate(global[p], offsets[j]);
        pos[j] = {pos[p][0] + off[0], pos[p][1] + off[1], pos[p][2] + off[2]};
      }
    }
    for (std::size_t j = 0; j < kNumJoints; ++j) {
      for (std::size_t c = 0; c < 3; ++c) seq.gt3d(t, j, c) = pos[j][c] - pos[Hips][c];
      pixels(t, j, 0) = pos[j][0];
      pixels(t, j, 1) = pos[j][1];
    }
    for (std::size_t i = 0; i < kNumImus; ++i) {
      Quat q = global[kImuBone[i]];
      if (noise > 0) {
        const double angle = noise * rng.next();
        const Quat perturb = Quat::from_axis_angle(rng.next(), rng.next(), rng.next(), angle);
        q = hamilton(q, perturb);
      }
      q = canonical(normalized(q));
      seq.imu(t, i, 0) = q.w;
      seq.imu(t, i, 1) = q.x;
      seq.imu(t, i, 2) = q.y;
      seq.imu(t, i, 3) = q.z;
    }
  }
  seq.keypoints = normalize_keypoints(pixels);
  return seq;
}

}  // namespace vimcan::preprocess
