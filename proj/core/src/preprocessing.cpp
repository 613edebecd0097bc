#include "camvox/preprocessing.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace camvox {

namespace {

bool same_pose(const RigidTransform& a, const RigidTransform& b) {
  return a.rotation() == b.rotation() && a.translation() == b.translation();
}

// Index of the last sample with t <= query, or npos when none exists.
std::size_t last_at_or_before(std::span<const ImuSample> imu, Timestamp t) {
  const auto it = std::upper_bound(imu.begin(), imu.end(), t,
                                   [](Timestamp q, const ImuSample& s) { return q < s.t; });
  if (it == imu.begin()) return static_cast<std::size_t>(-1);
  return static_cast<std::size_t>(std::distance(imu.begin(), it) - 1);
}

void check_sorted(std::span<const ImuSample> imu) {
  for (std::size_t i = 1; i < imu.size(); ++i) {
    if (imu[i].t < imu[i - 1].t) {
      std::ostringstream os;
      os << "IMU stream not sorted by time at sample " << i << " (" << imu[i].t.ns << " ns < " << imu[i - 1].t.ns
         << " ns)";
      throw_input_error(os.str());
    }
  }
}

// Motion across one IMU bracket, expressed relative to the frame-start pose.
struct Bracket {
  Timestamp t0;
  Timestamp t1;
  RigidTransform start_to_t0;
  Eigen::Matrix<double, 6, 1> twist;
  bool still = false;
};

}  // namespace

void validate_frame(const PointCloudFrame& frame) {
  if (frame.t_e < frame.t_s) throw_input_error("frame end precedes frame start");
  for (std::size_t i = 0; i < frame.points.size(); ++i) {
    const auto& p = frame.points[i];
    std::ostringstream os;
    const double r = p.position.norm();
    if (!(r > 0.0) || r > kSensorMaxRange) {
      os << "point " << i << " range " << r << " m outside (0, " << kSensorMaxRange << "]";
    } else if (!(p.reflectivity >= 0.0f && p.reflectivity <= 255.0f)) {
      os << "point " << i << " reflectivity " << p.reflectivity << " outside [0, 255]";
    } else if (p.t < frame.t_s || p.t > frame.t_e) {
      os << "point " << i << " timestamp " << p.t.ns << " ns outside frame [" << frame.t_s.ns << ", " << frame.t_e.ns
         << "] ns";
    } else {
      continue;
    }
    throw_input_error(os.str());
  }
}

RigidTransform pose_at(std::span<const ImuSample> imu, Timestamp t) {
  const std::size_t j = last_at_or_before(imu, t);
  if (j == static_cast<std::size_t>(-1) || (imu[j].t < t && j + 1 >= imu.size())) {
    std::ostringstream os;
    os << "IMU stream does not cover t=" << t.ns << " ns";
    throw Error(ErrorKind::kImuGap, os.str());
  }
  if (imu[j].t == t) return imu[j].pose;
  const auto& a = imu[j];
  const auto& b = imu[j + 1];
  return a.pose * interpolate_pose(a.pose.inverse() * b.pose, a.t, b.t, t);
}

PointCloudFrame undistort_frame(const PointCloudFrame& frame, std::span<const ImuSample> imu,
                                const UndistortOptions& opts) {
  check_sorted(imu);
  if (frame.t_e <= frame.t_s) throw_input_error("frame interval is empty");
  for (const auto& p : frame.points) {
    if (p.t < frame.t_s || p.t > frame.t_e) {
      std::ostringstream os;
      os << "point timestamp " << p.t.ns << " ns outside frame [" << frame.t_s.ns << ", " << frame.t_e.ns << "] ns";
      throw_input_error(os.str());
    }
  }

  const std::size_t js = last_at_or_before(imu, frame.t_s);
  const std::size_t je_last = last_at_or_before(imu, frame.t_e);
  const bool covers_start = js != static_cast<std::size_t>(-1);
  const bool covers_end = je_last != static_cast<std::size_t>(-1) &&
                          (imu[je_last].t == frame.t_e || je_last + 1 < imu.size());
  if (!covers_start || !covers_end) {
    std::ostringstream os;
    Timestamp from = frame.t_s;
    Timestamp to = frame.t_e;
    if (covers_start && !imu.empty()) from = imu.back().t;
    if (!covers_start && !imu.empty() && imu.front().t <= frame.t_e) to = imu.front().t;
    os << "IMU stream does not cover frame [" << frame.t_s.ns << ", " << frame.t_e.ns << "] ns; uncovered interval ["
       << from.ns << ", " << to.ns << "] ns";
    throw Error(ErrorKind::kImuGap, os.str());
  }
  const std::size_t je = imu[je_last].t == frame.t_e ? je_last : je_last + 1;

  const double max_gap_s = opts.max_gap_periods / opts.imu_rate_hz;
  for (std::size_t j = js; j < je; ++j) {
    if (seconds_between(imu[j].t, imu[j + 1].t) > max_gap_s + 1e-12) {
      std::ostringstream os;
      os << "IMU gap [" << imu[j].t.ns << ", " << imu[j + 1].t.ns << "] ns exceeds " << opts.max_gap_periods
         << " sample periods inside frame [" << frame.t_s.ns << ", " << frame.t_e.ns << "] ns";
      throw Error(ErrorKind::kImuGap, os.str());
    }
  }

  const RigidTransform pose_s = pose_at(imu, frame.t_s);
  const RigidTransform pose_s_inv = pose_s.inverse();
  std::vector<Bracket> brackets;
  brackets.reserve(je - js + 1);
  for (std::size_t j = js; j < je; ++j) {
    Bracket b;
    b.t0 = imu[j].t;
    b.t1 = imu[j + 1].t;
    b.still = same_pose(imu[j].pose, pose_s) && same_pose(imu[j + 1].pose, pose_s);
    if (!b.still) {
      b.start_to_t0 = pose_s_inv * imu[j].pose;
      b.twist = (imu[j].pose.inverse() * imu[j + 1].pose).log();
    }
    brackets.push_back(b);
  }
  if (brackets.empty()) {
    // t_s == t_e == a single sample time cannot happen (t_e > t_s), but keep the loop below safe.
    throw Error(ErrorKind::kImuGap, "IMU stream has a single sample inside the frame");
  }

  PointCloudFrame out;
  out.t_s = frame.t_s;
  out.t_e = frame.t_e;
  out.points.reserve(frame.points.size());
  std::size_t k = 0;
  for (const auto& p : frame.points) {
    // Points are usually time-ordered; fall back to a search otherwise.
    if (!(brackets[k].t0 <= p.t && p.t <= brackets[k].t1)) {
      const auto it = std::lower_bound(brackets.begin(), brackets.end(), p.t,
                                       [](const Bracket& b, Timestamp t) { return b.t1 < t; });
      k = static_cast<std::size_t>(std::distance(brackets.begin(), std::min(it, brackets.end() - 1)));
    }
    const Bracket& b = brackets[k];
    LidarPoint q = p;
    if (!b.still) {
      const double alpha =
          static_cast<double>(p.t.ns - b.t0.ns) / static_cast<double>(b.t1.ns - b.t0.ns);
      const RigidTransform T_si = b.start_to_t0 * RigidTransform::exp(alpha * b.twist);
      q.position = T_si.apply(p.position);
    }
    out.points.push_back(q);
  }
  return out;
}

DepthImages render_depth_images(std::span<const LidarPoint> points, const CameraIntrinsics& K,
                                const RigidTransform& T_lidar_cam) {
  DepthImages out{RasterImage(K.width, K.height), RasterImage(K.width, K.height)};
  const Mat3& R = T_lidar_cam.rotation();
  const Vec3& t = T_lidar_cam.translation();
  for (const auto& p : points) {
    const Vec3 xc = R * p.position + t;
    if (!(xc.z() > 0.0)) continue;
    const double u = K.fu * xc.x() / xc.z() + K.cu;
    const double v = K.fv * xc.y() / xc.z() + K.cv;
    const double ur = std::floor(u + 0.5);
    const double vr = std::floor(v + 0.5);
    if (!(ur >= 0.0 && ur < K.width && vr >= 0.0 && vr < K.height)) continue;
    const std::size_t idx = out.depth.index(static_cast<int>(ur), static_cast<int>(vr));
    const auto z = static_cast<float>(xc.z());
    float& d = out.depth[idx];
    if (d == 0.0f || z < d) {
      d = z;
      out.reflectivity[idx] = std::max(p.reflectivity, 1.0f);
    }
  }
  return out;
}

RgbdFrame make_rgbd_frame(RgbImage rgb, const PointCloudFrame& cloud, const CameraIntrinsics& K,
                          const RigidTransform& T_lidar_cam) {
  if (rgb.width() != K.width || rgb.height() != K.height) {
    std::ostringstream os;
    os << "camera image " << rgb.width() << "x" << rgb.height() << " does not match intrinsics " << K.width << "x"
       << K.height;
    throw_input_error(os.str());
  }
  auto images = render_depth_images(cloud, K, T_lidar_cam);
  return RgbdFrame{std::move(rgb), std::move(images.depth), std::move(images.reflectivity), cloud.t_s};
}

DepthClass classify_keypoint_depth(double depth_m, double close_threshold) {
  if (!(depth_m >= 0.0)) {
    std::ostringstream os;
    os << "keypoint depth must be non-negative, got " << depth_m;
    throw_input_error(os.str());
  }
  if (depth_m == 0.0) return DepthClass::kNoDepth;
  return depth_m <= close_threshold ? DepthClass::kClose : DepthClass::kFar;
}

DepthClassCounts count_depth_classes(const RasterImage& depth, double close_threshold) {
  DepthClassCounts c;
  for (const float d : depth.pixels()) {
    switch (classify_keypoint_depth(d, close_threshold)) {
      case DepthClass::kNoDepth:
        ++c.no_depth;
        break;
      case DepthClass::kClose:
        ++c.close;
        break;
      case DepthClass::kFar:
        ++c.far;
        break;
    }
  }
  return c;
}

PointCloudFrame accumulate_frames(std::span<const PointCloudFrame> frames) {
  if (frames.empty()) throw_input_error("cannot accumulate an empty frame sequence");
  PointCloudFrame out;
  out.t_s = frames.front().t_s;
  out.t_e = frames.back().t_e;
  std::size_t total = 0;
  for (const auto& f : frames) total += f.points.size();
  out.points.reserve(total);
  for (const auto& f : frames) out.points.insert(out.points.end(), f.points.begin(), f.points.end());
  return out;
}

std::vector<PointCloudFrame> split_into_frames(std::span<const LidarPoint> points,
                                               std::span<const std::pair<Timestamp, Timestamp>> bounds) {
  std::vector<PointCloudFrame> frames;
  frames.reserve(bounds.size());
  for (const auto& [ts, te] : bounds) {
    if (te <= ts) {
      std::ostringstream os;
      os << "frame boundary [" << ts.ns << ", " << te.ns << "] is empty";
      throw_input_error(os.str());
    }
    if (!frames.empty() && ts < frames.back().t_s) throw_input_error("frame boundaries are not sorted");
    frames.push_back(PointCloudFrame{{}, ts, te});
  }
  for (const auto& p : points) {
    auto it = std::lower_bound(frames.begin(), frames.end(), p.t,
                               [](const PointCloudFrame& f, Timestamp t) { return f.t_e < t; });
    if (it == frames.end() || p.t < it->t_s) {
      std::ostringstream os;
      os << "point at " << p.t.ns << " ns falls outside every frame boundary";
      throw_input_error(os.str());
    }
    it->points.push_back(p);
  }
  return frames;
}

}  // namespace camvox
