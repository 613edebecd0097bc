#include <random>

#include <benchmark/benchmark.h>

#include "camvox/calib.hpp"
#include "camvox/synth.hpp"

using namespace camvox;

namespace {

const synth::CalibrationFixture& fixture() {
  static const auto fx = synth::make_calibration_fixture(0);
  return fx;
}

struct MovingFrame {
  PointCloudFrame frame;
  std::vector<ImuSample> imu;
};

const MovingFrame& moving_frame() {
  static const MovingFrame m = [] {
    Eigen::Matrix<double, 6, 1> twist;
    twist << 2.0, 0.5, 0.0, 0.02, -0.01, 0.3;
    const auto motion = synth::constant_velocity_motion(RigidTransform::identity(), Timestamp{0}, twist);
    const Timestamp ts{0}, te{100'000'000};
    return MovingFrame{synth::generate_scan({}, fixture().scene, motion, ts, te), synth::sample_imu(motion, ts, te)};
  }();
  return m;
}

void BM_ImuCorrection(benchmark::State& state) {
  const auto& m = moving_frame();
  for (auto _ : state) benchmark::DoNotOptimize(undistort_frame(m.frame, m.imu));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m.frame.points.size()));
}
BENCHMARK(BM_ImuCorrection)->Unit(benchmark::kMillisecond);

void BM_CloudToDepthFrame(benchmark::State& state) {
  const auto& fx = fixture();
  const auto& m = moving_frame();
  for (auto _ : state) benchmark::DoNotOptimize(render_depth_images(m.frame, fx.K, fx.T_true));
}
BENCHMARK(BM_CloudToDepthFrame)->Unit(benchmark::kMillisecond);

void BM_CloudToDepthAccumulated(benchmark::State& state) {
  const auto& fx = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(render_depth_images(fx.cloud, fx.K, fx.T_true));
}
BENCHMARK(BM_CloudToDepthAccumulated)->Unit(benchmark::kMillisecond);

void BM_CameraEdges(benchmark::State& state) {
  const auto& fx = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(camera_edge_pipeline(fx.camera));
}
BENCHMARK(BM_CameraEdges)->Unit(benchmark::kMillisecond);

void BM_CostAtPose(benchmark::State& state) {
  const auto& fx = fixture();
  const EdgeMap cam = camera_edge_pipeline(fx.camera);
  const MatchConfig cfg = scaled_match_config({}, fx.K.width, fx.K.height);
  for (auto _ : state) benchmark::DoNotOptimize(cost_at_pose(cam, fx.cloud, fx.K, fx.T_true, cfg));
}
BENCHMARK(BM_CostAtPose)->Unit(benchmark::kMillisecond);

void BM_KnnQueries(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> U(0, 1519), V(0, 567);
  std::vector<Pixel> pts(static_cast<std::size_t>(state.range(0)));
  for (auto& p : pts) p = {U(rng), V(rng)};
  const NearestNeighborIndex idx(pts);
  std::vector<Pixel> q(1000);
  for (auto& p : q) p = {U(rng), V(rng)};
  for (auto _ : state) {
    for (const auto& p : q) benchmark::DoNotOptimize(idx.knn(p, 5));
  }
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_KnnQueries)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_OptimizeFastMode(benchmark::State& state) {
  const auto& fx = fixture();
  const EdgeMap cam = camera_edge_pipeline(fx.camera);
  MatchConfig cfg = scaled_match_config({}, fx.K.width, fx.K.height);
  cfg.fast_mode = true;
  const auto init = perturb_rotation(fx.T_true, EulerAngles{0, 0, deg_to_rad(2.0)});
  for (auto _ : state) benchmark::DoNotOptimize(optimize_extrinsic(cam, fx.cloud, fx.K, init, cfg));
}
BENCHMARK(BM_OptimizeFastMode)->Unit(benchmark::kSecond)->Iterations(1);

}  // namespace

BENCHMARK_MAIN();
