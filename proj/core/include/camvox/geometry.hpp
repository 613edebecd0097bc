#pragma once

#include <compare>
#include <cstdint>
#include <optional>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "camvox/error.hpp"

namespace camvox {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Nanoseconds since the session epoch.
struct Timestamp {
  std::int64_t ns = 0;

  constexpr auto operator<=>(const Timestamp&) const = default;

  static constexpr Timestamp from_seconds(double s) {
    return Timestamp{static_cast<std::int64_t>(s * 1e9 + (s >= 0 ? 0.5 : -0.5))};
  }
  constexpr double seconds() const { return static_cast<double>(ns) * 1e-9; }
};

constexpr double seconds_between(Timestamp a, Timestamp b) {
  return static_cast<double>(b.ns - a.ns) * 1e-9;
}

/// Rigid-body transform x' = R x + t. Rotation is kept orthonormal with det +1.
class RigidTransform {
 public:
  RigidTransform() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  RigidTransform(const Mat3& rotation, const Vec3& translation);

  static RigidTransform identity() { return {}; }
  static RigidTransform from_translation(const Vec3& t) { return {Mat3::Identity(), t}; }
  static RigidTransform from_rotation(const Mat3& r) { return {r, Vec3::Zero()}; }
  /// Unit quaternion (w, x, y, z) plus translation. The quaternion is normalized.
  static RigidTransform from_quaternion(double qw, double qx, double qy, double qz, const Vec3& t);

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  Eigen::Quaterniond quaternion() const { return Eigen::Quaterniond(rotation_); }

  RigidTransform inverse() const;
  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }

  /// Twist (rho, omega) with exp(log(T)) == T. omega is the rotation vector.
  Eigen::Matrix<double, 6, 1> log() const;
  static RigidTransform exp(const Eigen::Matrix<double, 6, 1>& twist);

  friend RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
    return RigidTransform(a.rotation_ * b.rotation_, a.rotation_ * b.translation_ + a.translation_);
  }

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) { return a * b; }
inline Vec3 transform_point(const RigidTransform& t, const Vec3& p) { return t.apply(p); }

/// Largest absolute entry difference between two transforms (rotation and translation).
double max_abs_difference(const RigidTransform& a, const RigidTransform& b);

/// Angle of the relative rotation between a and b, radians.
double rotation_angle_between(const RigidTransform& a, const RigidTransform& b);

/// Intrinsic Z-Y-X (yaw, then pitch, then roll) Euler angles, radians.
struct EulerAngles {
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;

  Mat3 to_rotation() const;
  static EulerAngles from_rotation(const Mat3& r);

  double& operator[](int axis);
  double operator[](int axis) const;
};

Mat3 rotation_about_axis(const Vec3& axis, double angle);
double wrap_angle(double a);

inline constexpr double kPi = 3.14159265358979323846;
constexpr double deg_to_rad(double d) { return d * kPi / 180.0; }
constexpr double rad_to_deg(double r) { return r * 180.0 / kPi; }

/// Screw-linear interpolation of the motion t_s -> t_e, evaluated at t_i.
/// Returns exp(alpha * log(T_se)) with alpha = (t_i - t_s) / (t_e - t_s).
RigidTransform interpolate_pose(const RigidTransform& T_se, Timestamp t_s, Timestamp t_e, Timestamp t_i);
RigidTransform interpolate_pose(const RigidTransform& T_se, double alpha);

/// Pinhole intrinsics of a rectified camera.
struct CameraIntrinsics {
  double fu = 0.0;
  double fv = 0.0;
  double cu = 0.0;
  double cv = 0.0;
  int width = 0;
  int height = 0;

  /// Throws InputError when the invariants do not hold.
  void validate() const;
  double diagonal() const;
};

enum class ProjectionStatus { kInView, kOutOfBounds, kBehindCamera };

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double z = 0.0;
  ProjectionStatus status = ProjectionStatus::kBehindCamera;

  bool in_view() const { return status == ProjectionStatus::kInView; }
};

/// Projects a lidar-frame point into the image. Behind-camera points carry no (u, v).
Projection project_point(const CameraIntrinsics& K, const RigidTransform& T_lidar_cam, const Vec3& X);

/// Camera-frame point at depth z along pixel (u, v).
Vec3 unproject(const CameraIntrinsics& K, double u, double v, double z);

}  // namespace camvox
