#pragma once

#include <array>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "vimcan/preprocess/quaternion.hpp"
#include "vimcan/preprocess/sequences.hpp"

namespace vimcan::preprocess {

/// Fixed rotations of the IMU chain: per-IMU bone->IMU and sensor->global,
/// one global->camera.
struct CalibrationSet {
  std::array<Quat, skeleton::kNumImus> bone_to_imu{};
  std::array<Quat, skeleton::kNumImus> sensor_to_global{};
  Quat global_to_camera{};

  void validate() const {
    for (const auto& q : bone_to_imu) require_unit(q, "bone_to_imu");
    for (const auto& q : sensor_to_global) require_unit(q, "sensor_to_global");
    require_unit(global_to_camera, "global_to_camera");
  }
};

/// Raw IMU measurements (T x 6 x 4) -> bone orientations in the camera frame.
inline ImuSequence apply_calibration(const ImuSequence& raw, const CalibrationSet& cal) {
  cal.validate();
  ImuSequence out(raw.frames);
  for (std::size_t t = 0; t < raw.frames; ++t) {
    for (std::size_t i = 0; i < skeleton::kNumImus; ++i) {
      const Quat m{raw(t, i, 0), raw(t, i, 1), raw(t, i, 2), raw(t, i, 3)};
      const Quat q = bone_orientation_camera(cal.bone_to_imu[i], m, cal.sensor_to_global[i], cal.global_to_camera);
      out(t, i, 0) = q.w;
      out(t, i, 1) = q.x;
      out(t, i, 2) = q.y;
      out(t, i, 3) = q.z;
    }
  }
  return out;
}

// {"bone_to_imu": [6 x [w,x,y,z]], "sensor_to_global": [6 x [w,x,y,z]], "global_to_camera": [w,x,y,z]}
inline nlohmann::json to_json(const CalibrationSet& c) {
  nlohmann::json j;
  j["bone_to_imu"] = nlohmann::json::array();
  j["sensor_to_global"] = nlohmann::json::array();
  for (std::size_t i = 0; i < skeleton::kNumImus; ++i) {
    j["bone_to_imu"].push_back(to_json(c.bone_to_imu[i]));
    j["sensor_to_global"].push_back(to_json(c.sensor_to_global[i]));
  }
  j["global_to_camera"] = to_json(c.global_to_camera);
  return j;
}

inline CalibrationSet calibration_from_json(const nlohmann::json& j) {
  CalibrationSet c;
  try {
    const auto& bi = j.at("bone_to_imu");
    const auto& sg = j.at("sensor_to_global");
    require(bi.size() == skeleton::kNumImus && sg.size() == skeleton::kNumImus, ErrorCode::FormatError,
            "calibration needs 6 bone_to_imu and 6 sensor_to_global quaternions");
    for (std::size_t i = 0; i < skeleton::kNumImus; ++i) {
      c.bone_to_imu[i] = quat_from_json(bi[i]);
      c.sensor_to_global[i] = quat_from_json(sg[i]);
    }
    c.global_to_camera = quat_from_json(j.at("global_to_camera"));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::FormatError, std::string("calibration: ") + e.what());
  }
  c.validate();
  return c;
}

inline CalibrationSet load_calibration(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::IoError, "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::FormatError, path + ": " + e.what());
  }
  return calibration_from_json(j);
}

}  // namespace vimcan::preprocess
