#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "camvox/geometry.hpp"
#include "camvox/preprocessing.hpp"
#include "camvox/raster.hpp"

namespace camvox::synth {

/// Two-rotor prism scan. Deflection a(t) = (e^{i w1 t} + e^{i w2 t}) / 2 lies in the unit disc and
/// is scaled onto the tangent plane of the field of view.
struct ScanPatternParams {
  double omega_1 = 2.0 * kPi * 7294.0 / 60.0;   // rad/s
  double omega_2 = -2.0 * kPi * 4664.0 / 60.0;  // rad/s
  double half_fov_h = deg_to_rad(81.7 / 2.0);
  double half_fov_v = deg_to_rad(25.1 / 2.0);
  double point_rate = 240000.0;  // points per second
  double frame_period = 0.1;     // seconds
  double range_noise_sigma = 0.0;  // meters; 0 = exact
  std::uint64_t noise_seed = 0;

  void validate() const;
  /// Unit beam direction in the lidar frame (x forward, y left, z up) at time t.
  Vec3 direction(Timestamp t) const;
};

/// Alternating albedo bands on a face, in face-local meters.
struct StripePattern {
  double angle = 0.0;   // band normal direction in the face plane, radians
  double period = 1.0;  // width of one band
  float albedo = 0.0f;  // albedo of the odd bands
};

/// Rectangle (or infinite plane when a half-extent is infinite) spanned by axis_u, axis_v.
struct Plane {
  Vec3 origin = Vec3::Zero();
  Vec3 axis_u = Vec3::UnitX();
  Vec3 axis_v = Vec3::UnitY();
  double half_u = std::numeric_limits<double>::infinity();
  double half_v = std::numeric_limits<double>::infinity();
  float albedo = 128.0f;
  std::optional<StripePattern> stripes;
};

/// Oriented box. Faces are ordered +x, -x, +y, -y, +z, -z in the box frame.
struct Box {
  RigidTransform pose;  // box frame -> world
  Vec3 half_extents = Vec3::Ones();
  std::array<float, 6> face_albedo{128, 128, 128, 128, 128, 128};
  std::array<std::optional<StripePattern>, 6> face_stripes{};
};

struct Hit {
  double distance = 0.0;
  Vec3 point = Vec3::Zero();
  float albedo = 0.0f;
  Vec3 normal = Vec3::UnitZ();  // surface normal, either orientation
};

struct Scene {
  std::vector<Plane> planes;
  std::vector<Box> boxes;

  void validate() const;
  bool empty() const { return planes.empty() && boxes.empty(); }
  /// Nearest hit along origin + s * dir for s > 0. dir must be unit length.
  std::optional<Hit> cast(const Vec3& origin, const Vec3& dir) const;
};

/// Lidar pose in the world as a function of time.
using Motion = std::function<RigidTransform(Timestamp)>;

Motion stationary_motion(const RigidTransform& pose = RigidTransform::identity());
/// pose(t) = start * exp((t - t0) * twist), twist in units per second.
Motion constant_velocity_motion(const RigidTransform& start, Timestamp t0, const Eigen::Matrix<double, 6, 1>& twist);

/// One frame of the rosette scan over [t_s, t_e). Points are in the lidar frame at their own
/// emission time, so platform motion shows up as distortion.
PointCloudFrame generate_scan(const ScanPatternParams& params, const Scene& scene, const Motion& motion, Timestamp t_s,
                              Timestamp t_e);

/// Consecutive frames of frame_period each, starting at t0.
std::vector<PointCloudFrame> generate_frames(const ScanPatternParams& params, const Scene& scene, const Motion& motion,
                                             Timestamp t0, int count);

/// IMU samples of the motion at the given rate covering [t_s, t_e].
std::vector<ImuSample> sample_imu(const Motion& motion, Timestamp t_s, Timestamp t_e, double rate_hz = kDefaultImuRateHz);

/// Camera image formation. The defaults give the bare albedo at each pixel centre.
struct CameraShading {
  Vec3 sun = Vec3(-0.5, 0.6, 0.65);  // direction towards the light, world frame
  double ambient = 1.0;              // 1 disables directional lighting
  int samples = 1;                   // per-axis supersampling
};

/// Per-pixel ray cast; pixel = mean shaded albedo over the samples, 0 where nothing is hit.
RasterImage render_camera(const Scene& scene, const CameraIntrinsics& K, const RigidTransform& T_cam_world,
                          const CameraShading& shading = {});

/// Residual of a cloud against the static scene seen from `pose`: for each point, the ray from
/// the lidar origin through it is re-cast and the range difference taken.
struct RescanResidual {
  double rms = 0.0;
  double max_abs = 0.0;
  std::size_t misses = 0;
};
RescanResidual static_rescan_residual(const Scene& scene, const RigidTransform& pose, const PointCloudFrame& cloud);

struct FixtureOptions {
  int frames = 50;  // 5 s at 10 Hz
  ScanPatternParams scan;
  CameraShading shading{Vec3(-0.5, 0.6, 0.65), 0.35, 2};
};

struct CalibrationFixture {
  RasterImage camera;
  PointCloudFrame cloud;  // accumulated
  std::vector<std::pair<Timestamp, Timestamp>> frame_bounds;
  std::vector<ImuSample> imu;  // stationary stream over the accumulation
  CameraIntrinsics K;
  RigidTransform T_true;  // lidar -> camera
  Scene scene;
};

/// Camera of the calibration fixtures: 1520 x 568 with the lidar's horizontal field of view.
CameraIntrinsics fixture_intrinsics();

/// Deterministic building-like scene with ground truth extrinsic, keyed by seed.
CalibrationFixture make_calibration_fixture(std::uint64_t seed, const FixtureOptions& opts = {});

/// Single flat wall facing the sensor: no usable structure.
CalibrationFixture make_featureless_fixture(const FixtureOptions& opts = {});

}  // namespace camvox::synth
