#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "camvox/io.hpp"
#include "camvox/synth.hpp"

namespace camvox::cli {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) { return std::chrono::duration<double, std::milli>(Clock::now() - t0).count(); }

// Cloud as one frame spanning its timestamps.
PointCloudFrame whole_frame(std::vector<LidarPoint> pts) {
  PointCloudFrame f;
  if (!pts.empty()) {
    const auto [lo, hi] = std::minmax_element(pts.begin(), pts.end(),
                                              [](const LidarPoint& a, const LidarPoint& b) { return a.t < b.t; });
    f.t_s = lo->t;
    f.t_e = Timestamp{hi->t.ns == lo->t.ns ? hi->t.ns + 1 : hi->t.ns};
  }
  f.points = std::move(pts);
  return f;
}

void check_image_size(const RasterImage& img, const CameraIntrinsics& K, const fs::path& path) {
  if (img.width() != K.width || img.height() != K.height) {
    throw_input_error(path.string() + ": image is " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                      ", intrinsics say " + std::to_string(K.width) + "x" + std::to_string(K.height));
  }
}

nlohmann::json euler_deg(const EulerAngles& e) {
  return {{"roll", rad_to_deg(e.roll)}, {"pitch", rad_to_deg(e.pitch)}, {"yaw", rad_to_deg(e.yaw)}};
}

}  // namespace

void log_stage(const std::string& stage, double ms, const std::string& extra) {
  std::fprintf(stderr, "stage=%s ms=%.3f%s%s\n", stage.c_str(), ms, extra.empty() ? "" : " ", extra.c_str());
}

int cmd_undistort(const UndistortArgs& a) {
  if (!(a.options.imu_rate_hz > 0) || !(a.options.max_gap_periods >= 1)) {
    throw_input_error("imu_rate_hz must be positive and max_gap_periods at least 1");
  }
  auto points = io::read_points(a.cloud);
  const auto imu = io::read_imu(a.imu);
  std::vector<PointCloudFrame> frames;
  if (a.frames) {
    frames = split_into_frames(points, io::read_frame_bounds(*a.frames));
  } else {
    frames.push_back(whole_frame(std::move(points)));
  }

  std::vector<LidarPoint> out;
  double sum2 = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto t0 = Clock::now();
    const PointCloudFrame fixed = undistort_frame(frames[i], imu, a.options);
    log_stage("preprocessing.imu_correction", ms_since(t0),
              "frame=" + std::to_string(i) + " points=" + std::to_string(fixed.points.size()));
    double mean = 0, worst = 0;
    for (std::size_t k = 0; k < fixed.points.size(); ++k) {
      const double d = (fixed.points[k].position - frames[i].points[k].position).norm();
      mean += d;
      worst = std::max(worst, d);
    }
    if (!fixed.points.empty()) mean /= static_cast<double>(fixed.points.size());
    std::printf("frame %zu [%lld, %lld] ns: %zu points, correction mean %.6f m max %.6f m\n", i,
                static_cast<long long>(fixed.t_s.ns), static_cast<long long>(fixed.t_e.ns), fixed.points.size(), mean,
                worst);
    out.insert(out.end(), fixed.points.begin(), fixed.points.end());
  }
  io::write_points(a.out, out);

  if (a.reference) {
    const auto ref = io::read_points(*a.reference);
    if (ref.size() != out.size()) {
      throw_input_error(a.reference->string() + ": holds " + std::to_string(ref.size()) + " points, output has " +
                        std::to_string(out.size()));
    }
    for (std::size_t k = 0; k < ref.size(); ++k, ++n) sum2 += (ref[k].position - out[k].position).squaredNorm();
    std::printf("rms vs reference: %.3e m over %zu points\n", n ? std::sqrt(sum2 / static_cast<double>(n)) : 0.0, n);
  }
  std::printf("wrote %zu points in %zu frames to %s\n", out.size(), frames.size(), a.out.string().c_str());
  return kSuccess;
}

int cmd_project(const ProjectArgs& a) {
  if (!(a.close_threshold > 0)) throw_input_error("close_threshold must be positive");
  if (!(a.overlay_max_depth > 0)) throw_input_error("overlay_max_depth must be positive");
  const CameraIntrinsics K = io::read_intrinsics(a.intrinsics);
  const CalibParams ext = io::read_extrinsics(a.extrinsics);
  const auto points = io::read_points(a.cloud);

  const auto t0 = Clock::now();
  const DepthImages img = render_depth_images(points, K, ext.extrinsic);
  log_stage("preprocessing.cloud_to_depth", ms_since(t0),
            "points=" + std::to_string(points.size()) + " size=" + std::to_string(K.width) + "x" + std::to_string(K.height));

  const fs::path prefix(a.out_prefix);
  if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
  io::write_depth_png_mm(a.out_prefix + "_depth.png", img.depth);
  io::write_raster_f32(a.out_prefix + "_depth.f32", img.depth);
  io::write_gray_png(a.out_prefix + "_reflectivity.png", img.reflectivity);
  RasterImage base = img.reflectivity;
  if (a.image) {
    base = io::read_gray_image(*a.image);
    check_image_size(base, K, *a.image);
  }
  io::write_rgb_png(a.out_prefix + "_overlay.png", io::depth_overlay(base, img.depth, a.overlay_max_depth));

  const auto c = count_depth_classes(img.depth, a.close_threshold);
  std::printf("fill ratio %.4f\n", fill_ratio(img.depth));
  std::printf("pixels at %.1f m: close %zu far %zu no-depth %zu (total %zu)\n", a.close_threshold, c.close, c.far,
              c.no_depth, img.depth.size());
  return kSuccess;
}

int cmd_calibrate(const CalibrateArgs& a) {
  a.match.validate();
  if (!(a.margin >= 0)) throw_input_error("margin must be non-negative");
  if (!(a.stationary.window_s > 0) || !(a.stationary.ang_tol_rad > 0) || !(a.stationary.trans_tol_m > 0)) {
    throw_input_error("stationary window and tolerances must be positive");
  }
  if (!a.imu && !a.assume_stationary) {
    throw_input_error("calibration needs a stationary platform: pass --imu or --assume-stationary");
  }

  const CameraIntrinsics K = io::read_intrinsics(a.intrinsics);
  const CalibParams init = io::read_extrinsics(a.init);
  const RasterImage gray = io::read_gray_image(a.image);
  check_image_size(gray, K, a.image);
  if (a.imu && detect_stationary(io::read_imu(*a.imu), a.stationary) != Motion::kStationary) {
    throw_input_error(a.imu->string() + ": platform is moving; calibration needs a stationary accumulation");
  }
  const PointCloudFrame cloud = whole_frame(io::read_points(a.cloud));
  const MatchConfig cfg = scaled_match_config(a.match, K.width, K.height);

  const auto t0 = Clock::now();
  const EdgeMap cam = camera_edge_pipeline(gray, cfg.edges);
  log_stage("calibration.camera_edges", ms_since(t0), "pixels=" + std::to_string(cam.pixel_count()));

  const auto t1 = Clock::now();
  const CalibrationResult r = optimize_extrinsic(cam, cloud, K, init.extrinsic, cfg);
  log_stage("calibration", ms_since(t1),
            "evaluations=" + std::to_string(r.evaluations) + " cycles=" + std::to_string(r.cycle_costs.size()));

  CalibParams current = init;
  current.cost = r.initial_cost;
  CalibParams candidate = r.params;
  candidate.scene_id = a.scene_id;
  candidate.t = cloud.t_e;
  ExtrinsicCell cell(current);
  const UpdateDecision decision = cell.offer(candidate, a.margin);
  const bool accepted = decision == UpdateDecision::kAccept;
  io::write_extrinsics(a.out, *cell.load());

  const EulerAngles delta = rotation_error(init.extrinsic, candidate.extrinsic);
  nlohmann::json report{
      {"decision", accepted ? "accept" : "reject"},
      {"initial_cost", r.initial_cost},
      {"candidate_cost", candidate.cost},
      {"margin", a.margin},
      {"cycle_costs", r.cycle_costs},
      {"evaluations", r.evaluations},
      {"optimization_seconds", r.optimization_seconds},
      {"camera_edge_pixels", cam.pixel_count()},
      {"rotation_change_deg", euler_deg(delta)},
      {"scene_id", a.scene_id},
  };
  const Mat3& R = candidate.extrinsic.rotation();
  const Vec3& t = candidate.extrinsic.translation();
  report["candidate"] = {{"rotation", {R(0, 0), R(0, 1), R(0, 2), R(1, 0), R(1, 1), R(1, 2), R(2, 0), R(2, 1), R(2, 2)}},
                         {"translation", {t.x(), t.y(), t.z()}}};
  const fs::path report_path = a.report ? *a.report : fs::path(a.out.string() + ".report.json");
  std::ofstream(report_path) << report.dump(2) << '\n';

  if (a.overlay) {
    const EdgeMap lidar = lidar_edges_for_pose(cloud, K, candidate.extrinsic, cfg.edges);
    io::write_rgb_png(*a.overlay, io::edge_overlay(gray, &cam, &lidar));
  }

  std::printf("cost %.4f -> %.4f (margin %.3f): %s\n", r.initial_cost, candidate.cost, a.margin,
              accepted ? "accept" : "reject");
  std::printf("rotation change roll %+.4f pitch %+.4f yaw %+.4f deg\n", rad_to_deg(delta.roll), rad_to_deg(delta.pitch),
              rad_to_deg(delta.yaw));
  return accepted ? kSuccess : kRejected;
}

int cmd_synth(const SynthArgs& a) {
  if (a.frames < 1 || a.moving_frames < 0) throw_input_error("frames must be at least 1 and moving_frames non-negative");
  synth::FixtureOptions opts;
  opts.frames = a.frames;
  const auto t0 = Clock::now();
  const auto fx = a.featureless ? synth::make_featureless_fixture(opts) : synth::make_calibration_fixture(a.seed, opts);
  log_stage("synth.fixture", ms_since(t0), "points=" + std::to_string(fx.cloud.points.size()));

  const fs::path& d = a.out_dir;
  fs::create_directories(d);
  io::write_gray_png(d / "camera.png", fx.camera);
  io::write_points(d / "cloud.ply", fx.cloud.points);
  io::write_frame_bounds(d / "frames.csv", fx.frame_bounds);
  io::write_imu(d / "imu.csv", fx.imu);
  io::write_intrinsics(d / "intrinsics.json", fx.K);
  CalibParams truth{fx.T_true, 0.0, a.featureless ? "featureless" : "seed_" + std::to_string(a.seed), fx.cloud.t_e};
  io::write_extrinsics(d / "extrinsics_true.json", truth);
  CalibParams init = truth;
  init.extrinsic = perturb_rotation(
      fx.T_true, EulerAngles{deg_to_rad(a.init_offset_deg[0]), deg_to_rad(a.init_offset_deg[1]), deg_to_rad(a.init_offset_deg[2])});
  io::write_extrinsics(d / "init.json", init);

  if (a.moving_frames > 0) {
    // Platform under constant velocity; reference.csv holds each point in its frame-start lidar
    // frame, computed from the exact motion.
    Eigen::Matrix<double, 6, 1> twist;
    twist << 2.0, 0.5, 0.0, 0.02, -0.01, 0.3;
    const auto motion = synth::constant_velocity_motion(RigidTransform::identity(), Timestamp{0}, twist);
    const auto frames = synth::generate_frames(opts.scan, fx.scene, motion, Timestamp{0}, a.moving_frames);
    std::vector<LidarPoint> raw, ref;
    std::vector<std::pair<Timestamp, Timestamp>> bounds;
    for (const auto& f : frames) {
      raw.insert(raw.end(), f.points.begin(), f.points.end());
      bounds.emplace_back(f.t_s, f.t_e);
    }
    // Same frame assignment as the undistort command, so boundary points agree.
    for (const auto& f : split_into_frames(raw, bounds)) {
      const RigidTransform start_inv = motion(f.t_s).inverse();
      for (LidarPoint q : f.points) {
        q.position = start_inv.apply(motion(q.t).apply(q.position));
        ref.push_back(q);
      }
    }
    fs::create_directories(d / "moving");
    io::write_points(d / "moving" / "cloud.csv", raw);
    io::write_points(d / "moving" / "reference.csv", ref);
    io::write_frame_bounds(d / "moving" / "frames.csv", bounds);
    io::write_imu(d / "moving" / "imu.csv", synth::sample_imu(motion, frames.front().t_s, frames.back().t_e));
  }
  std::printf("wrote fixture %s (%zu points, %d frames) to %s\n", truth.scene_id.c_str(), fx.cloud.points.size(),
              a.frames, d.string().c_str());
  return kSuccess;
}

}  // namespace camvox::cli
