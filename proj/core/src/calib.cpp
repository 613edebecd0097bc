#include "camvox/calib.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <sstream>

namespace camvox {

void MatchConfig::validate() const {
  std::ostringstream os;
  if (!(b > 0.0)) {
    os << "mismatch weight b must be positive, got " << b;
  } else if (m < 1) {
    os << "nearest-neighbour count m must be at least 1, got " << m;
  } else if (!(d_max > 0.0)) {
    os << "match distance d_max must be positive, got " << d_max;
  } else if (max_iters < 1) {
    os << "max_iters must be at least 1, got " << max_iters;
  } else if (!(window_deg > 0.0) || !(min_window_deg > 0.0) || !(line_tolerance_deg > 0.0)) {
    os << "search windows and line tolerance must be positive";
  } else if (grid_points < 0) {
    os << "grid_points must be non-negative, got " << grid_points;
  } else if (!(tolerance >= 0.0)) {
    os << "convergence tolerance must be non-negative, got " << tolerance;
  } else if (optimize_translation && (!(translation_window_m > 0.0) || !(translation_tolerance_m > 0.0))) {
    os << "translation window and tolerance must be positive";
  } else if (!(edges.filter.min_length >= 1.0)) {
    os << "edge min_length must be at least 1 pixel, got " << edges.filter.min_length;
  } else {
    return;
  }
  throw_input_error(os.str());
}

MatchConfig scaled_match_config(MatchConfig cfg, int width, int height) {
  cfg.d_max = scale_to_resolution(cfg.d_max, width, height);
  return cfg;
}

CostResult evaluate_cost(const EdgeMap& camera_edges, const NearestNeighborIndex& index, const MatchConfig& cfg) {
  CostResult r;
  r.n_total = camera_edges.pixel_count();
  if (r.n_total == 0) throw_input_error("evaluate_cost needs at least one camera edge pixel");
  const auto m = std::min(static_cast<std::size_t>(cfg.m), index.size());
  const double d_max2 = cfg.d_max * cfg.d_max;
  double sum = 0.0;
  std::vector<Neighbor> nn;
  nn.reserve(m);
  for (const auto& seg : camera_edges.segments) {
    for (const auto& p : seg.pixels) {
      index.knn(p, m, nn);
      if (nn.empty() || static_cast<double>(nn.front().dist2) > d_max2) continue;
      ++r.n_matched;
      for (const auto& n : nn) sum += std::min(n.distance(), cfg.d_max);
    }
  }
  const double mismatch = cfg.b * static_cast<double>(r.n_total - r.n_matched) / static_cast<double>(r.n_total);
  r.cost = r.n_matched == 0 ? mismatch : sum / (static_cast<double>(r.n_matched) * static_cast<double>(m)) + mismatch;
  if (!std::isfinite(r.cost)) throw Error(ErrorKind::kNumeric, "cost function evaluated to a non-finite value");
  return r;
}

EdgeMap lidar_edges_for_pose(const PointCloudFrame& cloud, const CameraIntrinsics& K,
                             const RigidTransform& T_lidar_cam, const EdgePipelineConfig& cfg) {
  const auto images = render_depth_images(cloud, K, T_lidar_cam);
  return lidar_edge_pipeline(images.depth, images.reflectivity, cfg);
}

CostResult cost_at_pose(const EdgeMap& camera_edges, const PointCloudFrame& cloud, const CameraIntrinsics& K,
                        const RigidTransform& T_lidar_cam, const MatchConfig& cfg) {
  const EdgeMap lidar = lidar_edges_for_pose(cloud, K, T_lidar_cam, cfg.edges);
  if (lidar.pixel_count() == 0) {
    return {cfg.b, 0, camera_edges.pixel_count()};
  }
  return evaluate_cost(camera_edges, build_index(lidar), cfg);
}

RigidTransform perturb_rotation(const RigidTransform& T, const EulerAngles& delta) {
  return {T.rotation() * delta.to_rotation(), T.translation()};
}

EulerAngles rotation_error(const RigidTransform& truth, const RigidTransform& estimate) {
  return EulerAngles::from_rotation(truth.rotation().transpose() * estimate.rotation());
}

LineSearchResult golden_section_minimize(const std::function<double(double)>& f, double lo, double hi,
                                         double tolerance) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  LineSearchResult best{c, fc, 2};
  if (fd < best.value) best = {d, fd, 2};
  while (b - a > tolerance) {
    double x = 0.0;
    double fx = 0.0;
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      x = c;
      fx = fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      x = d;
      fx = fd = f(d);
    }
    ++best.evaluations;
    if (fx < best.value) {
      best.x = x;
      best.value = fx;
    }
  }
  return best;
}

LineSearchResult bracketed_minimize(const std::function<double(double)>& f, double lo, double hi, int grid,
                                    double tolerance) {
  if (grid < 2) return golden_section_minimize(f, lo, hi, tolerance);
  const double step = (hi - lo) / (grid - 1);
  LineSearchResult best{lo, f(lo), 1};
  int best_i = 0;
  for (int i = 1; i < grid; ++i) {
    const double x = i == grid - 1 ? hi : lo + i * step;
    const double fx = f(x);
    ++best.evaluations;
    if (fx < best.value) {
      best.x = x;
      best.value = fx;
      best_i = i;
    }
  }
  const double a = best_i == 0 ? lo : lo + (best_i - 1) * step;
  const double b = best_i == grid - 1 ? hi : lo + (best_i + 1) * step;
  const auto refined = golden_section_minimize(f, a, b, tolerance);
  best.evaluations += refined.evaluations;
  if (refined.value < best.value) {
    best.x = refined.x;
    best.value = refined.value;
  }
  return best;
}

namespace {

// Winning point index per pixel for the fast reprojection mode.
std::vector<Vec3> lidar_edge_points(const PointCloudFrame& cloud, const CameraIntrinsics& K,
                                    const RigidTransform& T, const EdgeMap& edges) {
  Raster<float> depth(K.width, K.height);
  Raster<std::int64_t> owner(K.width, K.height, -1);
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const auto pr = project_point(K, T, cloud.points[i].position);
    if (pr.status == ProjectionStatus::kBehindCamera) continue;
    const int u = static_cast<int>(std::floor(pr.u + 0.5));
    const int v = static_cast<int>(std::floor(pr.v + 0.5));
    if (!depth.contains(u, v)) continue;
    const auto z = static_cast<float>(pr.z);
    if (depth.at(u, v) == 0.0f || z < depth.at(u, v)) {
      depth.at(u, v) = z;
      owner.at(u, v) = static_cast<std::int64_t>(i);
    }
  }
  std::vector<Vec3> pts;
  for (const auto& s : edges.segments) {
    for (const auto& p : s.pixels) {
      const auto o = owner.at(p.u, p.v);
      if (o >= 0) pts.push_back(cloud.points[static_cast<std::size_t>(o)].position);
    }
  }
  return pts;
}

EdgeMap reproject_points(std::span<const Vec3> pts, const CameraIntrinsics& K, const RigidTransform& T) {
  Raster<std::uint8_t> r(K.width, K.height, 0);
  for (const auto& x : pts) {
    const auto pr = project_point(K, T, x);
    if (pr.status == ProjectionStatus::kBehindCamera) continue;
    const int u = static_cast<int>(std::floor(pr.u + 0.5));
    const int v = static_cast<int>(std::floor(pr.v + 0.5));
    if (r.contains(u, v)) r.at(u, v) = 1;
  }
  EdgeMap out;
  out.source = EdgeSource::kLidar;
  out.width = K.width;
  out.height = K.height;
  for (int v = 0; v < K.height; ++v) {
    for (int u = 0; u < K.width; ++u) {
      if (r.at(u, v)) out.segments.push_back(EdgeSegment{{Pixel{u, v}}});
    }
  }
  return out;
}

}  // namespace

CalibrationResult optimize_extrinsic(const EdgeMap& camera_edges, const PointCloudFrame& lidar_cloud,
                                     const CameraIntrinsics& K, const RigidTransform& T_init,
                                     const MatchConfig& cfg) {
  cfg.validate();
  K.validate();
  const auto started = std::chrono::steady_clock::now();
  if (camera_edges.pixel_count() == 0) {
    throw Error(ErrorKind::kInsufficientStructure, "insufficient scene structure: no camera edges survive filtering");
  }
  const EdgeMap init_edges = lidar_edges_for_pose(lidar_cloud, K, T_init, cfg.edges);
  if (init_edges.pixel_count() == 0) {
    throw Error(ErrorKind::kInsufficientStructure, "insufficient scene structure: no lidar edges survive filtering");
  }
  std::vector<Vec3> cached;
  if (cfg.fast_mode) cached = lidar_edge_points(lidar_cloud, K, T_init, init_edges);

  // State: (roll, pitch, yaw) in radians, then translation offset in the camera frame.
  using State = std::array<double, 6>;
  auto pose_of = [&](const State& s) {
    RigidTransform T = perturb_rotation(T_init, EulerAngles{s[0], s[1], s[2]});
    return RigidTransform(T.rotation(), T.translation() + Vec3(s[3], s[4], s[5]));
  };
  std::map<State, double> memo;
  int evaluations = 0;
  auto cost = [&](const State& s) {
    if (auto it = memo.find(s); it != memo.end()) return it->second;
    const RigidTransform T = pose_of(s);
    double c = 0.0;
    if (cfg.fast_mode) {
      const EdgeMap lidar = reproject_points(cached, K, T);
      c = lidar.pixel_count() == 0 ? cfg.b : evaluate_cost(camera_edges, build_index(lidar), cfg).cost;
    } else {
      c = cost_at_pose(camera_edges, lidar_cloud, K, T, cfg).cost;
    }
    if (!std::isfinite(c)) throw Error(ErrorKind::kNumeric, "cost function evaluated to a non-finite value");
    ++evaluations;
    memo.emplace(s, c);
    return c;
  };

  State cur{};
  double best = cost(cur);
  CalibrationResult result;
  result.initial_cost = best;

  // Returns whether the line minimum was interior to the bracket.
  auto descend_axis = [&](int axis, double half_window, double tol) {
    auto f = [&](double x) {
      State s = cur;
      s[static_cast<std::size_t>(axis)] = x;
      return cost(s);
    };
    const double x0 = cur[static_cast<std::size_t>(axis)];
    const auto r = bracketed_minimize(f, x0 - half_window, x0 + half_window, cfg.grid_points, tol);
    if (r.value < best) {
      cur[static_cast<std::size_t>(axis)] = r.x;
      best = r.value;
    }
    return std::abs(cur[static_cast<std::size_t>(axis)] - x0) < half_window - tol;
  };

  // Each axis keeps its own bracket; it halves after a cycle whose minimum was interior and
  // stays put while the minimum sits on the bracket edge.
  auto run_phase = [&](int first_axis, double window, double min_window, double tol) {
    std::array<double, 3> windows{window, window, window};
    for (int cycle = 0; cycle < cfg.max_iters; ++cycle) {
      const double start = best;
      for (int k = 0; k < 3; ++k) {
        auto& w = windows[static_cast<std::size_t>(k)];
        if (descend_axis(first_axis + k, w, tol)) w = std::max(min_window, 0.5 * w);
      }
      result.cycle_costs.push_back(best);
      if (start - best < cfg.tolerance) break;
    }
  };

  run_phase(0, deg_to_rad(cfg.window_deg), deg_to_rad(cfg.min_window_deg), deg_to_rad(cfg.line_tolerance_deg));
  if (cfg.optimize_translation) {
    run_phase(3, cfg.translation_window_m, cfg.translation_tolerance_m, cfg.translation_tolerance_m);
  }

  result.params.extrinsic = pose_of(cur);
  result.params.cost = best;
  result.evaluations = evaluations;
  result.optimization_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

UpdateDecision decide_update(const CalibParams& current, const CalibParams& candidate, double margin) {
  if (!std::isfinite(current.cost) || !std::isfinite(candidate.cost)) {
    throw Error(ErrorKind::kNumeric, "decide_update needs finite costs");
  }
  return candidate.cost < current.cost - margin ? UpdateDecision::kAccept : UpdateDecision::kReject;
}

ExtrinsicCell::ExtrinsicCell(CalibParams initial)
    : value_(std::make_shared<const CalibParams>(std::move(initial))) {}

std::shared_ptr<const CalibParams> ExtrinsicCell::load() const {
  std::lock_guard lock(mutex_);
  return value_;
}

UpdateDecision ExtrinsicCell::offer(const CalibParams& candidate, double margin) {
  auto next = std::make_shared<const CalibParams>(candidate);
  std::lock_guard lock(mutex_);
  const auto d = decide_update(*value_, *next, margin);
  if (d == UpdateDecision::kAccept) value_ = std::move(next);
  return d;
}

bool CalibrationTrigger::try_run(const std::function<void()>& job) {
  bool expected = false;
  if (!busy_.compare_exchange_strong(expected, true)) return false;
  struct Release {
    std::atomic<bool>& flag;
    ~Release() { flag.store(false); }
  } release{busy_};
  job();
  return true;
}

Motion detect_stationary(std::span<const ImuSample> imu, double window_s, double ang_tol_rad, double trans_tol_m) {
  if (!(window_s > 0.0)) throw_input_error("stationary window must be positive");
  if (imu.size() < 2) throw_input_error("stationary detection needs at least two IMU samples");
  const Timestamp end = imu.back().t;
  const Timestamp start{end.ns - Timestamp::from_seconds(window_s).ns};
  if (imu.front().t > start) {
    std::ostringstream os;
    os << "IMU stream spans " << seconds_between(imu.front().t, end) << " s, shorter than the " << window_s
       << " s stationary window";
    throw_input_error(os.str());
  }
  auto first = std::lower_bound(imu.begin(), imu.end(), start,
                                [](const ImuSample& s, Timestamp t) { return s.t < t; });
  // The window opens at `start`; use the pose there, interpolated when it falls between samples.
  const RigidTransform ref = pose_at(imu, start);
  for (auto it = first; it != imu.end(); ++it) {
    const RigidTransform d = ref.inverse() * it->pose;
    const double angle = Eigen::AngleAxisd(d.rotation()).angle();
    if (angle >= ang_tol_rad || d.translation().norm() >= trans_tol_m) return Motion::kMoving;
  }
  return Motion::kStationary;
}

}  // namespace camvox
