#include "camvox/geometry.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/SVD>

namespace camvox {

namespace {

Mat3 skew(const Vec3& w) {
  Mat3 s;
  s << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
  return s;
}

// Left Jacobian of SO(3); maps the translational part of a twist to t.
Mat3 left_jacobian(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 W = skew(omega);
  if (theta < 1e-6) {
    return Mat3::Identity() + 0.5 * W + (1.0 / 6.0) * W * W;
  }
  const double t2 = theta * theta;
  return Mat3::Identity() + ((1.0 - std::cos(theta)) / t2) * W + ((theta - std::sin(theta)) / (t2 * theta)) * W * W;
}

Mat3 so3_exp(const Vec3& omega) {
  const double theta = omega.norm();
  if (theta < 1e-12) {
    return Mat3::Identity() + skew(omega);
  }
  return Eigen::AngleAxisd(theta, omega / theta).toRotationMatrix();
}

Vec3 so3_log(const Mat3& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.axis() * aa.angle();
}

}  // namespace

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {}

RigidTransform RigidTransform::from_quaternion(double qw, double qx, double qy, double qz, const Vec3& t) {
  Eigen::Quaterniond q(qw, qx, qy, qz);
  const double n = q.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw_input_error("quaternion has zero or non-finite norm");
  }
  q.coeffs() /= n;
  return {q.toRotationMatrix(), t};
}

RigidTransform RigidTransform::inverse() const {
  const Mat3 rt = rotation_.transpose();
  return {rt, -(rt * translation_)};
}

Eigen::Matrix<double, 6, 1> RigidTransform::log() const {
  const Vec3 omega = so3_log(rotation_);
  const Vec3 rho = left_jacobian(omega).inverse() * translation_;
  Eigen::Matrix<double, 6, 1> xi;
  xi << rho, omega;
  return xi;
}

RigidTransform RigidTransform::exp(const Eigen::Matrix<double, 6, 1>& twist) {
  const Vec3 rho = twist.head<3>();
  const Vec3 omega = twist.tail<3>();
  return {so3_exp(omega), left_jacobian(omega) * rho};
}

double max_abs_difference(const RigidTransform& a, const RigidTransform& b) {
  const double dr = (a.rotation() - b.rotation()).cwiseAbs().maxCoeff();
  const double dt = (a.translation() - b.translation()).cwiseAbs().maxCoeff();
  return std::max(dr, dt);
}

double rotation_angle_between(const RigidTransform& a, const RigidTransform& b) {
  return Eigen::AngleAxisd(a.rotation().transpose() * b.rotation()).angle();
}

Mat3 EulerAngles::to_rotation() const {
  return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
          Eigen::AngleAxisd(roll, Vec3::UnitX()))
      .toRotationMatrix();
}

EulerAngles EulerAngles::from_rotation(const Mat3& r) {
  EulerAngles e;
  const double sp = std::clamp(-r(2, 0), -1.0, 1.0);
  e.pitch = std::asin(sp);
  if (std::abs(sp) < 1.0 - 1e-12) {
    e.roll = std::atan2(r(2, 1), r(2, 2));
    e.yaw = std::atan2(r(1, 0), r(0, 0));
  } else {
    // Gimbal lock: only yaw - roll (or yaw + roll) is observable; put it all in yaw.
    e.roll = 0.0;
    e.yaw = std::atan2(-r(0, 1), r(1, 1));
  }
  return e;
}

double& EulerAngles::operator[](int axis) {
  switch (axis) {
    case 0:
      return roll;
    case 1:
      return pitch;
    default:
      return yaw;
  }
}

double EulerAngles::operator[](int axis) const {
  return const_cast<EulerAngles&>(*this)[axis];
}

Mat3 rotation_about_axis(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

RigidTransform interpolate_pose(const RigidTransform& T_se, double alpha) {
  if (alpha == 0.0) return RigidTransform::identity();
  if (alpha == 1.0) return T_se;
  return RigidTransform::exp(alpha * T_se.log());
}

RigidTransform interpolate_pose(const RigidTransform& T_se, Timestamp t_s, Timestamp t_e, Timestamp t_i) {
  if (t_e <= t_s) {
    std::ostringstream os;
    os << "degenerate interpolation interval [" << t_s.ns << ", " << t_e.ns << "] ns";
    throw_input_error(os.str());
  }
  if (t_i < t_s || t_i > t_e) {
    std::ostringstream os;
    os << "interpolation time " << t_i.ns << " ns outside [" << t_s.ns << ", " << t_e.ns << "] ns";
    throw_input_error(os.str());
  }
  const double alpha = static_cast<double>(t_i.ns - t_s.ns) / static_cast<double>(t_e.ns - t_s.ns);
  return interpolate_pose(T_se, alpha);
}

void CameraIntrinsics::validate() const {
  std::ostringstream os;
  if (!(fu > 0.0) || !(fv > 0.0)) {
    os << "focal lengths must be positive (fu=" << fu << ", fv=" << fv << ")";
  } else if (width <= 0 || height <= 0) {
    os << "image size must be positive (" << width << "x" << height << ")";
  } else if (!(cu >= 0.0 && cu < width) || !(cv >= 0.0 && cv < height)) {
    os << "principal point (" << cu << ", " << cv << ") outside the " << width << "x" << height << " image";
  } else {
    return;
  }
  throw_input_error(os.str());
}

double CameraIntrinsics::diagonal() const {
  return std::hypot(static_cast<double>(width), static_cast<double>(height));
}

Projection project_point(const CameraIntrinsics& K, const RigidTransform& T_lidar_cam, const Vec3& X) {
  const Vec3 xc = T_lidar_cam.apply(X);
  Projection p;
  p.z = xc.z();
  if (!(xc.z() > 0.0)) {
    p.status = ProjectionStatus::kBehindCamera;
    return p;
  }
  p.u = K.fu * xc.x() / xc.z() + K.cu;
  p.v = K.fv * xc.y() / xc.z() + K.cv;
  const bool inside = p.u >= 0.0 && p.u < K.width && p.v >= 0.0 && p.v < K.height;
  p.status = inside ? ProjectionStatus::kInView : ProjectionStatus::kOutOfBounds;
  return p;
}

Vec3 unproject(const CameraIntrinsics& K, double u, double v, double z) {
  return {(u - K.cu) / K.fu * z, (v - K.cv) / K.fv * z, z};
}

}  // namespace camvox
