#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "camvox/edgemap.hpp"
#include "camvox/geometry.hpp"
#include "camvox/kdtree.hpp"
#include "camvox/preprocessing.hpp"

namespace camvox {

struct CalibParams {
  RigidTransform extrinsic;  // lidar -> camera
  double cost = 0.0;
  std::string scene_id;
  Timestamp t;
};

/// Pixel distance threshold at the reference resolution (1520 x 568).
inline constexpr double kReferenceMatchDistance = 30.0;

struct MatchConfig {
  double b = 10.0;       // mismatch weight
  int m = 5;             // nearest neighbours averaged per matched camera pixel
  double d_max = 30.0;   // pixels; a camera pixel is matched when its nearest lidar pixel is this close

  int max_iters = 12;             // coordinate-descent cycles
  double window_deg = 2.0;        // initial half-width of each 1-D bracket
  double min_window_deg = 0.05;
  double line_tolerance_deg = 0.01;
  int grid_points = 9;            // coarse samples per bracket before golden-section refinement
  double tolerance = 1e-3;        // stop when a cycle improves the cost by less than this

  bool optimize_translation = false;
  double translation_window_m = 0.05;
  double translation_tolerance_m = 0.002;

  // Reproject cached 3D points of the initial lidar edges instead of re-running the edge
  // pipeline per candidate. Faster; ignores occlusion changes.
  bool fast_mode = false;

  EdgePipelineConfig edges;

  /// Throws InputError when b <= 0, m < 1 or d_max <= 0 (or another knob is out of range).
  void validate() const;
};

/// Config with d_max scaled from the reference resolution to the given image.
MatchConfig scaled_match_config(MatchConfig cfg, int width, int height);

struct CostResult {
  double cost = 0.0;
  std::size_t n_matched = 0;
  std::size_t n_total = 0;
};

/// Average neighbour distance of matched camera pixels plus b * unmatched fraction.
/// Neighbour distances are truncated at d_max so the matched term never exceeds d_max.
CostResult evaluate_cost(const EdgeMap& camera_edges, const NearestNeighborIndex& index, const MatchConfig& cfg);

/// Lidar edges of the cloud rendered through (K, T_lidar_cam).
EdgeMap lidar_edges_for_pose(const PointCloudFrame& cloud, const CameraIntrinsics& K,
                             const RigidTransform& T_lidar_cam, const EdgePipelineConfig& cfg);

/// Cost of one extrinsic: render, extract lidar edges, index and evaluate. A pose that yields
/// no lidar edges scores b (pure mismatch).
CostResult cost_at_pose(const EdgeMap& camera_edges, const PointCloudFrame& cloud, const CameraIntrinsics& K,
                        const RigidTransform& T_lidar_cam, const MatchConfig& cfg);

/// Applies (roll, pitch, yaw) in the lidar frame: R' = R * R_zyx(delta).
RigidTransform perturb_rotation(const RigidTransform& T, const EulerAngles& delta);
/// Per-axis rotation error of `estimate` relative to `truth`, in the lidar frame (radians).
EulerAngles rotation_error(const RigidTransform& truth, const RigidTransform& estimate);

struct CalibrationResult {
  CalibParams params;
  double initial_cost = 0.0;
  std::vector<double> cycle_costs;  // cost after each full cycle
  int evaluations = 0;
  double optimization_seconds = 0.0;
};

/// Coordinate descent over (roll, pitch, yaw) with golden-section line searches.
CalibrationResult optimize_extrinsic(const EdgeMap& camera_edges, const PointCloudFrame& lidar_cloud,
                                     const CameraIntrinsics& K, const RigidTransform& T_init,
                                     const MatchConfig& cfg);

/// Minimizes f on [lo, hi]; returns the best point seen (the interval ends are not evaluated).
struct LineSearchResult {
  double x = 0.0;
  double value = 0.0;
  int evaluations = 0;
};
LineSearchResult golden_section_minimize(const std::function<double(double)>& f, double lo, double hi,
                                         double tolerance);

/// Samples `grid` evenly spaced points over [lo, hi] (ends included), then runs golden-section
/// search between the neighbours of the best sample. grid < 2 is plain golden-section search.
LineSearchResult bracketed_minimize(const std::function<double(double)>& f, double lo, double hi, int grid,
                                    double tolerance);

enum class UpdateDecision { kAccept, kReject };

inline constexpr double kDefaultUpdateMargin = 0.05;

/// Accept iff candidate.cost < current.cost - margin.
UpdateDecision decide_update(const CalibParams& current, const CalibParams& candidate,
                             double margin = kDefaultUpdateMargin);

/// The published extrinsic. Readers always see a complete value.
class ExtrinsicCell {
 public:
  explicit ExtrinsicCell(CalibParams initial);

  std::shared_ptr<const CalibParams> load() const;
  /// Runs decide_update against the published value and swaps on accept.
  UpdateDecision offer(const CalibParams& candidate, double margin = kDefaultUpdateMargin);

 private:
  mutable std::mutex mutex_;
  std::shared_ptr<const CalibParams> value_;
};

/// Lets at most one calibration run at a time; a trigger while busy is dropped.
class CalibrationTrigger {
 public:
  /// Returns false (and runs nothing) when a run is already in flight.
  bool try_run(const std::function<void()>& job);
  bool busy() const { return busy_.load(); }

 private:
  std::atomic<bool> busy_{false};
};

enum class Motion { kStationary, kMoving };

struct StationaryConfig {
  double window_s = 1.0;
  double ang_tol_rad = deg_to_rad(0.1);
  double trans_tol_m = 0.005;
};

/// Looks at the trailing window of the stream (ending at its last sample).
Motion detect_stationary(std::span<const ImuSample> imu, double window_s, double ang_tol_rad, double trans_tol_m);
inline Motion detect_stationary(std::span<const ImuSample> imu, const StationaryConfig& cfg = {}) {
  return detect_stationary(imu, cfg.window_s, cfg.ang_tol_rad, cfg.trans_tol_m);
}

}  // namespace camvox
