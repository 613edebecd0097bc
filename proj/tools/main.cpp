#include <cstdio>

#include <CLI11.hpp>

#include "commands.hpp"

using namespace camvox;
using namespace camvox::cli;

namespace {

// Options shared by every command that runs the edge pipelines.
void add_edge_options(CLI::App* cmd, EdgePipelineConfig& e) {
  cmd->add_option("--canny_sigma", e.canny.sigma, "Gaussian sigma before the gradient");
  cmd->add_option("--canny_kernel", e.canny.kernel_size, "Gaussian kernel size (odd)");
  cmd->add_option("--canny_low_ratio", e.canny.low_ratio, "low threshold as a fraction of the percentile magnitude");
  cmd->add_option("--canny_high_ratio", e.canny.high_ratio, "high threshold as a fraction of the percentile magnitude");
  cmd->add_option("--canny_percentile", e.canny.percentile, "gradient-magnitude percentile for the thresholds");
  cmd->add_option("--min_length", e.filter.min_length, "shortest kept contour, pixels at 1520x568");
  cmd->add_option("--clutter_radius", e.filter.clutter_radius, "clutter neighbourhood radius, pixels");
  cmd->add_option("--clutter_count", e.filter.clutter_count, "mean neighbouring edge pixels above which a contour is clutter");
  cmd->add_option("--contour_gap", e.filter.contour_gap, "segments this close (pixels) form one contour");
  cmd->add_option("--hole_fill_limit", e.closing_fill_limit, "lidar rasters sparser than this are hole-filled");
  cmd->add_option("--hole_fill_passes", e.fill_passes, "median hole-fill passes");
  cmd->add_option("--thin_edges", e.clean, "thin edges and prune spurs before filtering");
  cmd->add_option("--spur_length", e.spur_length, "longest side branch pruned, pixels");
  cmd->add_option("--no_data_margin", e.no_data_margin, "drop lidar edges this close to no-data, pixels");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Targetless lidar-camera calibration toolkit"};
  app.set_config("--config", "", "TOML config file; command-line values override it");
  app.fallthrough();
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "fixture seed for synth");

  UndistortArgs ua;
  auto* undistort = app.add_subcommand("undistort", "Correct lidar motion distortion with an IMU pose stream");
  undistort->add_option("--cloud", ua.cloud, "points (.csv or .ply)")->required();
  undistort->add_option("--imu", ua.imu, "IMU poses CSV")->required();
  undistort->add_option("--frames", ua.frames, "frame bounds CSV; whole cloud is one frame when absent");
  undistort->add_option("--reference", ua.reference, "expected output; prints the RMS difference");
  undistort->add_option("--out", ua.out, "output points")->required();
  undistort->add_option("--imu_rate_hz", ua.options.imu_rate_hz, "nominal IMU rate");
  undistort->add_option("--max_gap_periods", ua.options.max_gap_periods, "longest tolerated IMU gap, in periods");

  ProjectArgs pa;
  auto* project = app.add_subcommand("project", "Render depth and reflectivity images from a cloud");
  project->add_option("--cloud", pa.cloud)->required();
  project->add_option("--intrinsics", pa.intrinsics)->required();
  project->add_option("--extrinsics", pa.extrinsics)->required();
  project->add_option("--image", pa.image, "camera image for the overlay");
  project->add_option("--out_prefix", pa.out_prefix, "output path prefix")->required();
  project->add_option("--close_threshold", pa.close_threshold, "close/far keypoint depth split, meters");
  project->add_option("--overlay_max_depth", pa.overlay_max_depth, "depth mapped to the end of the overlay palette, meters");

  CalibrateArgs ca;
  auto* calibrate = app.add_subcommand("calibrate", "Estimate the lidar-to-camera rotation from scene edges");
  calibrate->add_option("--image", ca.image, "camera image (grayscale or color)")->required();
  calibrate->add_option("--cloud", ca.cloud, "accumulated stationary cloud")->required();
  calibrate->add_option("--intrinsics", ca.intrinsics)->required();
  calibrate->add_option("--init", ca.init, "initial extrinsics JSON")->required();
  calibrate->add_option("--out", ca.out, "published extrinsics JSON")->required();
  calibrate->add_option("--report", ca.report, "report JSON (default: <out>.report.json)");
  calibrate->add_option("--overlay", ca.overlay, "edge overlay PNG at the candidate extrinsic");
  calibrate->add_option("--imu", ca.imu, "IMU poses used to confirm the platform was stationary");
  calibrate->add_flag("--assume-stationary", ca.assume_stationary, "skip the IMU stationarity check");
  calibrate->add_option("--scene_id", ca.scene_id);
  calibrate->add_option("--mismatch_weight", ca.match.b, "cost added per unit of unmatched camera-edge fraction");
  calibrate->add_option("--neighbors", ca.match.m, "nearest lidar edge pixels averaged per camera pixel");
  calibrate->add_option("--match_distance", ca.match.d_max, "match distance, pixels at 1520x568");
  calibrate->add_option("--max_cycles", ca.match.max_iters, "coordinate-descent cycles");
  calibrate->add_option("--window_deg", ca.match.window_deg, "initial line-search half-width");
  calibrate->add_option("--min_window_deg", ca.match.min_window_deg);
  calibrate->add_option("--line_tolerance_deg", ca.match.line_tolerance_deg);
  calibrate->add_option("--grid_points", ca.match.grid_points, "coarse samples per line search");
  calibrate->add_option("--tolerance", ca.match.tolerance, "stop when a cycle improves less than this");
  calibrate->add_option("--optimize_translation", ca.match.optimize_translation);
  calibrate->add_option("--translation_window_m", ca.match.translation_window_m);
  calibrate->add_option("--fast_mode", ca.match.fast_mode, "reproject cached lidar edge points per candidate");
  calibrate->add_option("--margin", ca.margin, "required cost improvement to accept");
  calibrate->add_option("--stationary_window_s", ca.stationary.window_s);
  calibrate->add_option("--stationary_rotation_rad", ca.stationary.ang_tol_rad);
  calibrate->add_option("--stationary_translation_m", ca.stationary.trans_tol_m);
  add_edge_options(calibrate, ca.match.edges);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Write a synthetic calibration fixture");
  synth->add_option("--out", sa.out_dir, "output directory")->required();
  synth->add_option("--frames", sa.frames, "accumulated 0.1 s frames");
  synth->add_option("--moving_frames", sa.moving_frames, "frames of the constant-velocity sequence (0 = none)");
  synth->add_option("--init_offset_deg", sa.init_offset_deg, "roll pitch yaw offset of init.json");
  synth->add_flag("--featureless", sa.featureless, "single flat wall instead of the structured scene");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kSuccess : kInputError;
  }
  sa.seed = seed;

  try {
    if (undistort->parsed()) return cmd_undistort(ua);
    if (project->parsed()) return cmd_project(pa);
    if (calibrate->parsed()) return cmd_calibrate(ca);
    if (synth->parsed()) return cmd_synth(sa);
  } catch (const Error& e) {
    switch (e.kind()) {
      case ErrorKind::kInsufficientStructure:
        std::fprintf(stderr, "error: insufficient scene structure: %s\n", e.what());
        return kInsufficientStructure;
      case ErrorKind::kInput:
      case ErrorKind::kImuGap:
        std::fprintf(stderr, "error: %s\n", e.what());
        return kInputError;
      case ErrorKind::kNumeric:
        break;
    }
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInternalError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInternalError;
  }
  return kInputError;
}
