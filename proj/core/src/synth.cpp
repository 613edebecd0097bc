#include "camvox/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace camvox::synth {

namespace {

constexpr double kEps = 1e-9;

float stripe_albedo(float base, const std::optional<StripePattern>& stripes, double s, double t) {
  if (!stripes) return base;
  const double x = s * std::cos(stripes->angle) + t * std::sin(stripes->angle);
  const auto band = static_cast<long long>(std::floor(x / stripes->period));
  return (band % 2 == 0) ? base : stripes->albedo;
}

std::optional<Hit> intersect(const Plane& pl, const Vec3& o, const Vec3& d) {
  const Vec3 n = pl.axis_u.cross(pl.axis_v);
  const double denom = n.dot(d);
  if (std::abs(denom) < 1e-15) return std::nullopt;
  const double s = n.dot(pl.origin - o) / denom;
  if (!(s > kEps)) return std::nullopt;
  const Vec3 x = o + s * d;
  const double a = (x - pl.origin).dot(pl.axis_u);
  const double b = (x - pl.origin).dot(pl.axis_v);
  if (std::abs(a) > pl.half_u || std::abs(b) > pl.half_v) return std::nullopt;
  return Hit{s, x, stripe_albedo(pl.albedo, pl.stripes, a, b), n.normalized()};
}

std::optional<Hit> intersect(const Box& box, const Vec3& o, const Vec3& d) {
  const Mat3 Rt = box.pose.rotation().transpose();
  const Vec3 lo = Rt * (o - box.pose.translation());
  const Vec3 ld = Rt * d;
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  int near_axis = -1;
  int far_axis = -1;
  for (int k = 0; k < 3; ++k) {
    const double h = box.half_extents[k];
    if (std::abs(ld[k]) < 1e-15) {
      if (std::abs(lo[k]) > h) return std::nullopt;
      continue;
    }
    double t0 = (-h - lo[k]) / ld[k];
    double t1 = (h - lo[k]) / ld[k];
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > t_near) {
      t_near = t0;
      near_axis = k;
    }
    if (t1 < t_far) {
      t_far = t1;
      far_axis = k;
    }
  }
  if (t_near > t_far) return std::nullopt;
  double s = t_near;
  int axis = near_axis;
  if (!(s > kEps)) {
    s = t_far;
    axis = far_axis;
  }
  if (!(s > kEps) || axis < 0) return std::nullopt;
  const Vec3 lx = lo + s * ld;
  const int face = 2 * axis + (lx[axis] > 0 ? 0 : 1);
  const int ia = (axis + 1) % 3;
  const int ib = (axis + 2) % 3;
  const float albedo = stripe_albedo(box.face_albedo[static_cast<std::size_t>(face)],
                                     box.face_stripes[static_cast<std::size_t>(face)], lx[ia], lx[ib]);
  Vec3 normal = Vec3::Zero();
  normal[axis] = lx[axis] > 0 ? 1.0 : -1.0;
  return Hit{s, o + s * d, albedo, box.pose.rotation() * normal};
}

}  // namespace

void ScanPatternParams::validate() const {
  std::ostringstream os;
  if (!(point_rate > 0.0)) {
    os << "point_rate must be positive, got " << point_rate;
  } else if (!(frame_period > 0.0)) {
    os << "frame_period must be positive, got " << frame_period;
  } else if (!(half_fov_h > 0.0 && half_fov_h < kPi / 2) || !(half_fov_v > 0.0 && half_fov_v < kPi / 2)) {
    os << "half fields of view must lie in (0, pi/2)";
  } else if (omega_1 == 0.0 || omega_2 == 0.0 || omega_1 == omega_2) {
    os << "rotor rates must be nonzero and distinct";
  } else if (!(range_noise_sigma >= 0.0)) {
    os << "range noise sigma must be non-negative";
  } else {
    return;
  }
  throw_input_error(os.str());
}

Vec3 ScanPatternParams::direction(Timestamp t) const {
  const double s = t.seconds();
  const double a = 0.5 * (std::cos(omega_1 * s) + std::cos(omega_2 * s));
  const double b = 0.5 * (std::sin(omega_1 * s) + std::sin(omega_2 * s));
  return Vec3(1.0, std::tan(half_fov_h) * a, std::tan(half_fov_v) * b).normalized();
}

void Scene::validate() const {
  for (const auto& p : planes) {
    if (!(p.half_u > 0.0) || !(p.half_v > 0.0)) throw_input_error("plane extents must be positive");
    if (!(p.albedo >= 0.0f && p.albedo <= 255.0f)) throw_input_error("plane albedo outside [0, 255]");
  }
  for (const auto& b : boxes) {
    if (!(b.half_extents.minCoeff() > 0.0)) throw_input_error("box extents must be positive");
    for (const float a : b.face_albedo) {
      if (!(a >= 0.0f && a <= 255.0f)) throw_input_error("box albedo outside [0, 255]");
    }
  }
}

std::optional<Hit> Scene::cast(const Vec3& origin, const Vec3& dir) const {
  std::optional<Hit> best;
  auto consider = [&](const std::optional<Hit>& h) {
    if (h && (!best || h->distance < best->distance)) best = h;
  };
  for (const auto& p : planes) consider(intersect(p, origin, dir));
  for (const auto& b : boxes) consider(intersect(b, origin, dir));
  return best;
}

Motion stationary_motion(const RigidTransform& pose) {
  return [pose](Timestamp) { return pose; };
}

Motion constant_velocity_motion(const RigidTransform& start, Timestamp t0, const Eigen::Matrix<double, 6, 1>& twist) {
  return [=](Timestamp t) { return start * RigidTransform::exp(seconds_between(t0, t) * twist); };
}

PointCloudFrame generate_scan(const ScanPatternParams& params, const Scene& scene, const Motion& motion, Timestamp t_s,
                              Timestamp t_e) {
  params.validate();
  if (t_e <= t_s) throw_input_error("scan interval must satisfy t_e > t_s");
  PointCloudFrame frame;
  frame.t_s = t_s;
  frame.t_e = t_e;
  if (scene.empty()) return frame;

  std::mt19937_64 rng(params.noise_seed ^ static_cast<std::uint64_t>(t_s.ns));
  std::normal_distribution<double> noise(0.0, params.range_noise_sigma > 0.0 ? params.range_noise_sigma : 1.0);
  const double dt_ns = 1e9 / params.point_rate;
  const auto count = static_cast<std::int64_t>(std::ceil(static_cast<double>(t_e.ns - t_s.ns) / dt_ns));
  frame.points.reserve(static_cast<std::size_t>(count));
  for (std::int64_t k = 0; k < count; ++k) {
    const Timestamp t{t_s.ns + static_cast<std::int64_t>(std::llround(static_cast<double>(k) * dt_ns))};
    if (t >= t_e) break;
    const RigidTransform pose = motion(t);
    const Vec3 d = params.direction(t);
    const auto hit = scene.cast(pose.translation(), pose.rotation() * d);
    if (!hit) continue;
    double range = hit->distance;
    if (params.range_noise_sigma > 0.0) range += noise(rng);
    if (!(range > 0.0) || range > kSensorMaxRange) continue;
    frame.points.push_back(LidarPoint{range * d, hit->albedo, t});
  }
  return frame;
}

std::vector<PointCloudFrame> generate_frames(const ScanPatternParams& params, const Scene& scene, const Motion& motion,
                                             Timestamp t0, int count) {
  std::vector<PointCloudFrame> frames;
  frames.reserve(static_cast<std::size_t>(std::max(count, 0)));
  const std::int64_t period = Timestamp::from_seconds(params.frame_period).ns;
  for (int i = 0; i < count; ++i) {
    const Timestamp ts{t0.ns + i * period};
    frames.push_back(generate_scan(params, scene, motion, ts, Timestamp{ts.ns + period}));
  }
  return frames;
}

std::vector<ImuSample> sample_imu(const Motion& motion, Timestamp t_s, Timestamp t_e, double rate_hz) {
  if (!(rate_hz > 0.0)) throw_input_error("IMU rate must be positive");
  std::vector<ImuSample> out;
  const double dt_ns = 1e9 / rate_hz;
  for (std::int64_t k = 0;; ++k) {
    const Timestamp t{t_s.ns + static_cast<std::int64_t>(std::llround(static_cast<double>(k) * dt_ns))};
    out.push_back({t, motion(t)});
    if (t >= t_e) break;
  }
  return out;
}

RasterImage render_camera(const Scene& scene, const CameraIntrinsics& K, const RigidTransform& T_cam_world,
                          const CameraShading& shading) {
  K.validate();
  if (shading.samples < 1) throw_input_error("camera supersampling must be at least 1");
  RasterImage img(K.width, K.height);
  if (scene.empty()) return img;
  const RigidTransform world_from_cam = T_cam_world.inverse();
  const Vec3 origin = world_from_cam.translation();
  const int n = shading.samples;
  const Vec3 sun = shading.sun.normalized();
  for (int v = 0; v < K.height; ++v) {
    for (int u = 0; u < K.width; ++u) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
          // Sub-pixel sample centres; a single sample sits at the pixel centre.
          const double su = u + (i + 0.5) / n - 0.5;
          const double sv = v + (j + 0.5) / n - 0.5;
          const Vec3 dc((su - K.cu) / K.fu, (sv - K.cv) / K.fv, 1.0);
          const Vec3 dir = (world_from_cam.rotation() * dc).normalized();
          const auto hit = scene.cast(origin, dir);
          if (!hit) continue;
          double light = 1.0;
          if (shading.ambient < 1.0) {
            // Light the side facing the viewer.
            const Vec3 nrm = hit->normal.dot(dir) > 0 ? Vec3(-hit->normal) : hit->normal;
            light = shading.ambient + (1.0 - shading.ambient) * std::max(0.0, nrm.dot(sun));
          }
          acc += hit->albedo * light;
        }
      }
      img.at(u, v) = static_cast<float>(acc / (n * n));
    }
  }
  return img;
}

RescanResidual static_rescan_residual(const Scene& scene, const RigidTransform& pose, const PointCloudFrame& cloud) {
  RescanResidual r;
  double sum2 = 0.0;
  std::size_t n = 0;
  for (const auto& p : cloud.points) {
    const double range = p.position.norm();
    const auto hit = scene.cast(pose.translation(), pose.rotation() * (p.position / range));
    if (!hit) {
      ++r.misses;
      continue;
    }
    const double e = hit->distance - range;
    sum2 += e * e;
    r.max_abs = std::max(r.max_abs, std::abs(e));
    ++n;
  }
  r.rms = n ? std::sqrt(sum2 / static_cast<double>(n)) : 0.0;
  return r;
}

CameraIntrinsics fixture_intrinsics() {
  CameraIntrinsics K;
  K.width = 1520;
  K.height = 568;
  // Horizontal field of view equal to the lidar's.
  const double f = (K.width / 2.0) / std::tan(ScanPatternParams{}.half_fov_h);
  K.fu = f;
  K.fv = f;
  K.cu = K.width / 2.0;
  K.cv = K.height / 2.0;
  return K;
}

namespace {

// Lidar axes (x forward, y left, z up) to camera axes (x right, y down, z forward).
Mat3 lidar_to_camera_axes() {
  Mat3 r;
  r << 0, -1, 0, 0, 0, -1, 1, 0, 0;
  return r;
}

constexpr double kLidarHeight = 1.5;

CalibrationFixture finish_fixture(Scene scene, const RigidTransform& T_true, const FixtureOptions& opts) {
  CalibrationFixture fx;
  fx.scene = std::move(scene);
  fx.K = fixture_intrinsics();
  fx.T_true = T_true;
  fx.camera = render_camera(fx.scene, fx.K, fx.T_true, opts.shading);
  const auto motion = stationary_motion();
  const Timestamp t0{0};
  const auto frames = generate_frames(opts.scan, fx.scene, motion, t0, opts.frames);
  for (const auto& f : frames) fx.frame_bounds.emplace_back(f.t_s, f.t_e);
  fx.cloud = accumulate_frames(frames);
  fx.imu = sample_imu(motion, t0, fx.cloud.t_e);
  return fx;
}

}  // namespace

CalibrationFixture make_calibration_fixture(std::uint64_t seed, const FixtureOptions& opts) {
  std::mt19937_64 rng(0x9e3779b97f4a7c15ULL ^ (seed * 0x100000001b3ULL));
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  // Dark and bright albedos, both well separated from the backdrop and the ground.
  auto albedo = [&](bool bright) {
    return static_cast<float>(bright ? uniform(185.0, 240.0) : uniform(15.0, 45.0));
  };

  Scene scene;
  Plane ground;
  ground.origin = Vec3(0, 0, -kLidarHeight);
  ground.axis_u = Vec3::UnitX();
  ground.axis_v = Vec3::UnitY();
  ground.albedo = 70.0f;
  scene.planes.push_back(ground);

  Plane backdrop;
  const double back = uniform(60.0, 80.0);
  backdrop.origin = Vec3(back, 0, 20.0 - kLidarHeight);
  backdrop.axis_u = Vec3::UnitY();
  backdrop.axis_v = Vec3::UnitZ();
  backdrop.half_u = 300.0;
  backdrop.half_v = 20.0;
  backdrop.albedo = 125.0f;
  scene.planes.push_back(backdrop);

  // Buildings spread over azimuth slots, each with its roofline inside the lidar's view so it
  // stands against the backdrop.
  const ScanPatternParams scan;
  const double half_az = 0.8 * scan.half_fov_h;
  const int n_boxes = 5 + static_cast<int>(rng() % 3);
  const double slot = 2.0 * half_az / n_boxes;
  for (int i = 0; i < n_boxes; ++i) {
    Box b;
    const double az = -half_az + (i + uniform(0.35, 0.65)) * slot;
    // Neighbours alternate near and far so their outlines are depth steps.
    const double range = i % 2 == 0 ? uniform(12.0, 20.0) : uniform(26.0, 36.0);
    const double width = 2.0 * range * std::tan(slot * uniform(0.25, 0.4));
    const double depth = uniform(3.0, 8.0);
    const double across = std::tan(az) / std::tan(scan.half_fov_h);
    const double el_max = std::atan(std::tan(scan.half_fov_v) * std::sqrt(1.0 - across * across));
    const double height = kLidarHeight + range * std::tan(el_max * uniform(0.3, 0.75));
    b.half_extents = Vec3(depth / 2.0, width / 2.0, height / 2.0);
    const Vec3 centre(range * std::cos(az) + depth / 2.0, range * std::sin(az), -kLidarHeight + height / 2.0);
    b.pose = RigidTransform(rotation_about_axis(Vec3::UnitZ(), az + deg_to_rad(uniform(-35.0, 35.0))), centre);
    // Neighbours also alternate dark and bright.
    const bool bright = (i % 2 == 0) == (seed % 2 == 0);
    for (auto& a : b.face_albedo) a = albedo(bright);
    // Slanted bands on the sensor-facing faces of every other building.
    if (i % 2 == 0) {
      for (const int face : {1, 2, 3}) {
        StripePattern sp;
        sp.angle = deg_to_rad(uniform(25.0, 65.0)) * (uniform(0.0, 1.0) < 0.5 ? 1.0 : -1.0);
        sp.period = uniform(1.2, 2.5);
        sp.albedo = albedo(!bright);
        b.face_stripes[static_cast<std::size_t>(face)] = sp;
      }
    }
    scene.boxes.push_back(b);
  }
  scene.validate();

  const EulerAngles small{deg_to_rad(uniform(-1.7, 1.7)), deg_to_rad(uniform(-1.7, 1.7)),
                          deg_to_rad(uniform(-1.7, 1.7))};
  Vec3 dir(uniform(-1, 1), uniform(-1, 1), uniform(-1, 1));
  if (dir.norm() < 1e-3) dir = Vec3::UnitX();
  const Vec3 t = dir.normalized() * uniform(0.05, 0.15);
  const RigidTransform T_true(lidar_to_camera_axes() * small.to_rotation(), t);
  return finish_fixture(std::move(scene), T_true, opts);
}

CalibrationFixture make_featureless_fixture(const FixtureOptions& opts) {
  Scene scene;
  Plane wall;
  wall.origin = Vec3(20.0, 0, 0);
  wall.axis_u = Vec3::UnitY();
  wall.axis_v = Vec3::UnitZ();
  wall.albedo = 150.0f;
  scene.planes.push_back(wall);
  const RigidTransform T_true(lidar_to_camera_axes(), Vec3(0.0, -0.08, 0.05));
  return finish_fixture(std::move(scene), T_true, opts);
}

}  // namespace camvox::synth
