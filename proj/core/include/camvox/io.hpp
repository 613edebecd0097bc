#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "camvox/calib.hpp"
#include "camvox/edgemap.hpp"
#include "camvox/geometry.hpp"
#include "camvox/preprocessing.hpp"
#include "camvox/raster.hpp"

namespace camvox::io {

namespace fs = std::filesystem;

// Point clouds: CSV lines `x,y,z,reflectivity,t_ns`, or binary little-endian PLY with the
// same five vertex properties. Format is chosen by extension (.ply, anything else is CSV).
std::vector<LidarPoint> read_points(const fs::path& path);
void write_points(const fs::path& path, std::span<const LidarPoint> points);
std::vector<LidarPoint> read_points_csv(const fs::path& path);
void write_points_csv(const fs::path& path, std::span<const LidarPoint> points);
std::vector<LidarPoint> read_points_ply(const fs::path& path);
void write_points_ply(const fs::path& path, std::span<const LidarPoint> points);

// Frame boundaries: CSV lines `t_s,t_e` (nanoseconds).
std::vector<std::pair<Timestamp, Timestamp>> read_frame_bounds(const fs::path& path);
void write_frame_bounds(const fs::path& path, std::span<const std::pair<Timestamp, Timestamp>> bounds);

// IMU poses: CSV lines `t_ns,qw,qx,qy,qz,tx,ty,tz`.
std::vector<ImuSample> read_imu(const fs::path& path);
void write_imu(const fs::path& path, std::span<const ImuSample> samples);

// Intrinsics: JSON object {fu, fv, cu, cv, width, height}.
CameraIntrinsics read_intrinsics(const fs::path& path);
void write_intrinsics(const fs::path& path, const CameraIntrinsics& K);

// Extrinsics: JSON {rotation: 9 numbers row-major, translation: 3 numbers (m),
// provenance: {cost, scene_id, timestamp_ns}}. Provenance is optional on read.
CalibParams read_extrinsics(const fs::path& path);
void write_extrinsics(const fs::path& path, const CalibParams& params);

// Depth: 16-bit PNG in millimeters (clamped at 65.535 m), or raw float32 meters with an
// 8-byte header (uint32 width, uint32 height, little-endian).
void write_depth_png_mm(const fs::path& path, const RasterImage& depth_m);
RasterImage read_depth_png_mm(const fs::path& path);
void write_raster_f32(const fs::path& path, const RasterImage& img);
RasterImage read_raster_f32(const fs::path& path);

// 8-bit images.
void write_gray_png(const fs::path& path, const RasterImage& img);
RasterImage read_gray_image(const fs::path& path);
void write_rgb_png(const fs::path& path, const RgbImage& img);
RgbImage read_rgb_image(const fs::path& path);

// Edge segments: CSV `segment_id,u,v`, one row per pixel in chain order.
void write_edges_csv(const fs::path& path, const EdgeMap& edges);
EdgeMap read_edges_csv(const fs::path& path, int width, int height, EdgeSource source);

/// Edges drawn over a grayscale base: camera edges orange, lidar edges blue, optional
/// nearest-neighbour links red.
struct OverlayLinks {
  std::vector<std::pair<Pixel, Pixel>> links;
};
RgbImage edge_overlay(const RasterImage& base, const EdgeMap* camera, const EdgeMap* lidar,
                      const OverlayLinks* links = nullptr);

/// Lidar depth colored over a grayscale camera image.
RgbImage depth_overlay(const RasterImage& gray, const RasterImage& depth, double max_depth);

}  // namespace camvox::io
