#pragma once

#include <span>
#include <vector>

#include "camvox/geometry.hpp"
#include "camvox/raster.hpp"

namespace camvox {

struct LidarPoint {
  Vec3 position = Vec3::Zero();  // lidar frame at acquisition instant, meters
  float reflectivity = 0.0f;     // [0, 255]
  Timestamp t;
};

struct PointCloudFrame {
  std::vector<LidarPoint> points;
  Timestamp t_s;
  Timestamp t_e;
};

/// Lidar/body pose relative to the session origin.
struct ImuSample {
  Timestamp t;
  RigidTransform pose;
};

struct RgbdFrame {
  RgbImage rgb;
  RasterImage depth;         // meters, 0 = no return
  RasterImage reflectivity;  // [0, 255], 0 = no return
  Timestamp t_s;
};

inline constexpr double kSensorMaxRange = 260.0;
inline constexpr double kDefaultImuRateHz = 200.0;
inline constexpr double kDefaultCloseThreshold = 130.0;

/// Checks the per-point invariants (range, reflectivity, timestamps inside the frame).
void validate_frame(const PointCloudFrame& frame);

/// Pose of the platform at time t by screw interpolation between the bracketing samples.
RigidTransform pose_at(std::span<const ImuSample> imu, Timestamp t);

struct UndistortOptions {
  double imu_rate_hz = kDefaultImuRateHz;
  double max_gap_periods = 3.0;
};

/// Re-expresses every point in the lidar frame at frame.t_s using the IMU pose stream.
/// The stream must contain a sample at or before t_s and one at or after t_e.
PointCloudFrame undistort_frame(const PointCloudFrame& frame, std::span<const ImuSample> imu,
                                const UndistortOptions& opts = {});

struct DepthImages {
  RasterImage depth;
  RasterImage reflectivity;
};

/// Z-buffered projection of the cloud. Pixels without a return hold 0. A return with
/// reflectivity 0 is stored as 1 so that both rasters share the same support.
DepthImages render_depth_images(std::span<const LidarPoint> points, const CameraIntrinsics& K,
                                const RigidTransform& T_lidar_cam);
inline DepthImages render_depth_images(const PointCloudFrame& cloud, const CameraIntrinsics& K,
                                       const RigidTransform& T_lidar_cam) {
  return render_depth_images(cloud.points, K, T_lidar_cam);
}

RgbdFrame make_rgbd_frame(RgbImage rgb, const PointCloudFrame& cloud, const CameraIntrinsics& K,
                          const RigidTransform& T_lidar_cam);

enum class DepthClass { kNoDepth, kClose, kFar };

DepthClass classify_keypoint_depth(double depth_m, double close_threshold = kDefaultCloseThreshold);

struct DepthClassCounts {
  std::size_t close = 0;
  std::size_t far = 0;
  std::size_t no_depth = 0;
};

DepthClassCounts count_depth_classes(const RasterImage& depth, double close_threshold = kDefaultCloseThreshold);

/// Concatenates stationary frames; t_s of the first frame and t_e of the last.
PointCloudFrame accumulate_frames(std::span<const PointCloudFrame> frames);

/// Splits a time-ordered point stream into frames by [t_s, t_e] boundaries.
/// Points on a shared boundary go to the earlier frame.
std::vector<PointCloudFrame> split_into_frames(std::span<const LidarPoint> points,
                                               std::span<const std::pair<Timestamp, Timestamp>> bounds);

}  // namespace camvox
