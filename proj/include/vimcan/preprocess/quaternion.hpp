#pragma once

#include <array>
#include <cmath>

#include <nlohmann/json.hpp>

#include "vimcan/error.hpp"

namespace vimcan::preprocess {

/// Unit quaternion in (w, x, y, z) order, Hamilton convention.
struct Quat {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  static Quat identity() { return {}; }

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
  Quat conjugate() const { return {w, -x, -y, -z}; }
  std::array<double, 4> array() const { return {w, x, y, z}; }

  static Quat from_axis_angle(double ax, double ay, double az, double angle) {
    const double n = std::sqrt(ax * ax + ay * ay + az * az);
    if (n == 0.0 || angle == 0.0) return identity();
    const double s = std::sin(0.5 * angle) / n;
    return {std::cos(0.5 * angle), ax * s, ay * s, az * s};
  }

  /// Rotation vector (axis * angle) to quaternion.
  static Quat from_rotation_vector(double rx, double ry, double rz) {
    return from_axis_angle(rx, ry, rz, std::sqrt(rx * rx + ry * ry + rz * rz));
  }
};

inline constexpr double kUnitTolerance = 1e-6;

/// Hemisphere-canonical form: w > 0, or for w ~ 0 the first significant
/// vector component is positive.
inline Quat canonical(Quat q) {
  constexpr double tiny = 1e-12;
  bool flip = q.w < -tiny;
  if (std::abs(q.w) <= tiny) {
    for (double c : {q.x, q.y, q.z}) {
      if (std::abs(c) > tiny) {
        flip = c < 0;
        break;
      }
    }
  }
  if (flip) q = {-q.w, -q.x, -q.y, -q.z};
  return q;
}

inline Quat normalized(Quat q) {
  const double n = q.norm();
  require(n > 0 && std::isfinite(n), ErrorCode::NonUnitInput, "cannot normalize a zero quaternion");
  return {q.w / n, q.x / n, q.y / n, q.z / n};
}

inline void require_unit(const Quat& q, const char* what) {
  require(std::abs(q.norm() - 1.0) <= kUnitTolerance, ErrorCode::NonUnitInput,
          std::string(what) + " has norm " + std::to_string(q.norm()));
}

inline Quat hamilton(const Quat& a, const Quat& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z, a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x, a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

/// Hamilton product of unit quaternions, renormalized and canonicalized.
inline Quat quat_mul(const Quat& a, const Quat& b) {
  require_unit(a, "left operand");
  require_unit(b, "right operand");
  return canonical(normalized(hamilton(a, b)));
}

/// v' = q v q*
inline std::array<double, 3> rotate(const Quat& q, const std::array<double, 3>& v) {
  const Quat p = hamilton(hamilton(q, {0.0, v[0], v[1], v[2]}), q.conjugate());
  return {p.x, p.y, p.z};
}

/// Same rotation up to sign.
inline bool same_rotation(const Quat& a, const Quat& b, double tol) {
  const double dot = a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
  return std::abs(std::abs(dot) - 1.0) <= tol;
}

/// Bone orientation in the camera frame from the fixed bone->IMU offset, the
/// per-frame IMU measurement, the sensor->global alignment and the
/// global->camera extrinsic, composed left to right.
inline Quat bone_orientation_camera(const Quat& bone_to_imu, const Quat& imu_measurement, const Quat& sensor_to_global,
                                    const Quat& global_to_camera) {
  return quat_mul(quat_mul(quat_mul(bone_to_imu, imu_measurement), sensor_to_global), global_to_camera);
}

inline nlohmann::json to_json(const Quat& q) { return nlohmann::json::array({q.w, q.x, q.y, q.z}); }

inline Quat quat_from_json(const nlohmann::json& j) {
  require(j.is_array() && j.size() == 4, ErrorCode::FormatError, "quaternion must be [w, x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

}  // namespace vimcan::preprocess
