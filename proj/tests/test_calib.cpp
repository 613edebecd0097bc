#include <random>
#include <thread>

#include <gtest/gtest.h>

#include "camvox/calib.hpp"

using namespace camvox;

namespace {

EdgeMap pixels_map(std::vector<Pixel> px, int w = 400, int h = 300) {
  EdgeMap m;
  m.width = w;
  m.height = h;
  for (const auto& p : px) m.segments.push_back(EdgeSegment{{p}});
  return m;
}

// Cost evaluated with an exhaustive neighbour search and the formula written out directly.
double brute_cost(const EdgeMap& cam, const EdgeMap& lidar, const MatchConfig& cfg) {
  const auto lp = lidar.all_pixels();
  const auto cp = cam.all_pixels();
  const std::size_t m = std::min<std::size_t>(static_cast<std::size_t>(cfg.m), lp.size());
  double sum = 0;
  std::size_t n = 0;
  for (const auto& c : cp) {
    std::vector<double> d;
    for (const auto& l : lp) d.push_back(std::hypot(double(l.u - c.u), double(l.v - c.v)));
    std::sort(d.begin(), d.end());
    if (d[0] > cfg.d_max) continue;
    ++n;
    for (std::size_t k = 0; k < m; ++k) sum += std::min(d[k], cfg.d_max);
  }
  const double N = static_cast<double>(cp.size());
  const double mismatch = cfg.b * (N - static_cast<double>(n)) / N;
  return n == 0 ? mismatch : sum / (static_cast<double>(n) * static_cast<double>(m)) + mismatch;
}

std::vector<ImuSample> stream(int n, double rate, const std::function<RigidTransform(double)>& pose) {
  std::vector<ImuSample> s;
  for (int i = 0; i < n; ++i) s.push_back({Timestamp::from_seconds(i / rate), pose(i / rate)});
  return s;
}

}  // namespace

TEST(MatchConfig, Validation) {
  EXPECT_NO_THROW(MatchConfig{}.validate());
  MatchConfig c;
  c.b = 0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.m = 0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.d_max = -1;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.max_iters = 0;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_DOUBLE_EQ(scaled_match_config({}, 3040, 1136).d_max, 60.0);
}

TEST(EvaluateCost, PerfectOverlapIsZero) {
  const EdgeMap e = pixels_map({{10, 10}, {20, 30}, {100, 5}});
  MatchConfig cfg;
  cfg.m = 1;
  const auto r = evaluate_cost(e, build_index(e), cfg);
  EXPECT_EQ(r.cost, 0.0);
  EXPECT_EQ(r.n_matched, 3u);
  EXPECT_EQ(r.n_total, 3u);
}

TEST(EvaluateCost, NoMatchesIsB) {
  const EdgeMap cam = pixels_map({{10, 10}, {12, 10}});
  const EdgeMap lid = pixels_map({{300, 200}});
  const auto r = evaluate_cost(cam, build_index(lid), MatchConfig{});
  EXPECT_EQ(r.cost, 10.0);
  EXPECT_EQ(r.n_matched, 0u);
}

TEST(EvaluateCost, WorkedTwoPixelExample) {
  // One pixel at distance 2 from its only neighbour, one far away: 2/(1*1) + 10*(1/2) = 7.
  const EdgeMap cam = pixels_map({{10, 10}, {200, 200}});
  const EdgeMap lid = pixels_map({{12, 10}});
  MatchConfig cfg;
  cfg.m = 1;
  const auto r = evaluate_cost(cam, build_index(lid), cfg);
  EXPECT_EQ(r.cost, 7.0);
  EXPECT_EQ(r.n_matched, 1u);
  EXPECT_EQ(r.n_total, 2u);
}

TEST(EvaluateCost, MatchBoundaryIsInclusive) {
  MatchConfig cfg;
  cfg.m = 1;
  cfg.d_max = 5;
  const EdgeMap lid = pixels_map({{0, 0}});
  EXPECT_EQ(evaluate_cost(pixels_map({{3, 4}}), build_index(lid), cfg).n_matched, 1u);
  EXPECT_EQ(evaluate_cost(pixels_map({{3, 5}}), build_index(lid), cfg).n_matched, 0u);
}

TEST(EvaluateCost, RejectsEmptyCameraEdges) {
  const EdgeMap lid = pixels_map({{0, 0}});
  EXPECT_THROW(evaluate_cost(pixels_map({}), build_index(lid), MatchConfig{}), Error);
}

TEST(EvaluateCost, EqualsBruteForceAndStaysInBounds) {
  std::mt19937_64 rng(40);
  std::uniform_int_distribution<int> U(0, 399), V(0, 299), n_cam(1, 400), n_lid(1, 3000);
  std::uniform_real_distribution<double> dm(1, 60), bw(0.5, 20);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<Pixel> c(static_cast<std::size_t>(n_cam(rng))), l(static_cast<std::size_t>(n_lid(rng)));
    for (auto& p : c) p = {U(rng), V(rng)};
    for (auto& p : l) p = {U(rng), V(rng)};
    MatchConfig cfg;
    cfg.m = 1 + trial % 7;
    cfg.d_max = dm(rng);
    cfg.b = bw(rng);
    const EdgeMap cam = pixels_map(c), lid = pixels_map(l);
    const auto r = evaluate_cost(cam, build_index(lid), cfg);
    EXPECT_NEAR(r.cost, brute_cost(cam, lid, cfg), 1e-12);
    EXPECT_GE(r.cost, 0.0);
    EXPECT_LE(r.cost, cfg.d_max + cfg.b);
  }
}

TEST(EvaluateCost, OracleEquivalenceAtTenThousandPixels) {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<int> U(0, 1519), V(0, 567);
  std::vector<Pixel> c(2000), l(10000);
  for (auto& p : c) p = {U(rng), V(rng)};
  for (auto& p : l) p = {U(rng), V(rng)};
  const EdgeMap cam = pixels_map(c, 1520, 568), lid = pixels_map(l, 1520, 568);
  MatchConfig cfg;
  cfg.d_max = 8;
  EXPECT_NEAR(evaluate_cost(cam, build_index(lid), cfg).cost, brute_cost(cam, lid, cfg), 1e-12);
}

TEST(EvaluateCost, MismatchTermDefeatsSparseTrap) {
  // Camera: a 400 px horizontal line. Truth: lidar line 2 px below it. Trap: a pose where 5% of
  // the camera pixels sit exactly on lidar pixels and nearly all the rest are out of range.
  std::vector<Pixel> cam_px, truth_px, trap_px;
  for (int u = 0; u < 400; ++u) {
    cam_px.push_back({u, 100});
    truth_px.push_back({u, 102});
  }
  for (int u = 0; u < 20; ++u) trap_px.push_back({u, 100});
  for (int u = 0; u < 400; ++u) trap_px.push_back({u, 250});
  const EdgeMap cam = pixels_map(cam_px, 400, 300);
  MatchConfig cfg;
  cfg.m = 1;
  cfg.d_max = 3;
  const auto truth = evaluate_cost(cam, build_index(pixels_map(truth_px, 400, 300)), cfg);
  const auto trap = evaluate_cost(cam, build_index(pixels_map(trap_px, 400, 300)), cfg);
  // The 20 exact pixels plus three more within d_max of the line's end.
  EXPECT_EQ(trap.n_matched, 23u);
  EXPECT_EQ(truth.cost, 2.0);
  EXPECT_GT(trap.cost, truth.cost);
  // Without the mismatch term the trap would win.
  EXPECT_LT(trap.cost - cfg.b * 377.0 / 400.0, truth.cost);
}

TEST(Perturbation, AppliedInLidarFrame) {
  const RigidTransform T(rotation_about_axis(Vec3(1, 2, 3), 0.4), Vec3(0.1, 0.2, 0.3));
  const EulerAngles d{0.01, -0.02, 0.03};
  const RigidTransform P = perturb_rotation(T, d);
  EXPECT_EQ(P.translation(), T.translation());
  const EulerAngles e = rotation_error(T, P);
  EXPECT_NEAR(e.roll, d.roll, 1e-12);
  EXPECT_NEAR(e.pitch, d.pitch, 1e-12);
  EXPECT_NEAR(e.yaw, d.yaw, 1e-12);
}

TEST(LineSearch, GoldenSectionFindsQuadraticMinimum) {
  int calls = 0;
  auto f = [&](double x) {
    ++calls;
    return (x - 0.3) * (x - 0.3);
  };
  const auto r = golden_section_minimize(f, -1, 1, 1e-6);
  EXPECT_NEAR(r.x, 0.3, 1e-6);
  EXPECT_EQ(r.evaluations, calls);
}

TEST(LineSearch, BracketedReachesBracketEnd) {
  // Golden-section alone never samples the ends; the grid does.
  auto f = [](double x) { return x < 0.999 ? 1.0 - 0.1 * x : 0.0; };
  EXPECT_GT(golden_section_minimize(f, -1, 1, 1e-2).value, 0.0);
  const auto r = bracketed_minimize(f, -1, 1, 9, 1e-3);
  EXPECT_EQ(r.value, 0.0);
  EXPECT_GE(r.x, 0.999);
}

TEST(LineSearch, BracketedRefinesAroundBestSample) {
  int calls = 0;
  auto f = [&](double x) {
    ++calls;
    return std::abs(x - 0.123);
  };
  const auto r = bracketed_minimize(f, -2, 2, 9, 1e-5);
  EXPECT_NEAR(r.x, 0.123, 1e-5);
  EXPECT_EQ(r.evaluations, calls);
}

TEST(DecideUpdate, Examples) {
  auto params = [](double c) {
    CalibParams p;
    p.cost = c;
    return p;
  };
  EXPECT_EQ(decide_update(params(7.95), params(6.11), 0.05), UpdateDecision::kAccept);
  EXPECT_EQ(decide_update(params(6.11), params(6.10), 0.05), UpdateDecision::kReject);
  EXPECT_EQ(decide_update(params(6.11), params(6.11), 0.05), UpdateDecision::kReject);
  EXPECT_EQ(decide_update(params(6.11), params(6.11), 0.0), UpdateDecision::kReject);
  EXPECT_EQ(decide_update(params(1.0), params(0.5)), UpdateDecision::kAccept);
  EXPECT_THROW(decide_update(params(NAN), params(1)), Error);
}

TEST(ExtrinsicCell, SwapsOnlyOnAccept) {
  CalibParams a;
  a.cost = 7.95;
  a.scene_id = "a";
  ExtrinsicCell cell(a);
  CalibParams b = a;
  b.cost = 7.93;
  b.scene_id = "b";
  EXPECT_EQ(cell.offer(b), UpdateDecision::kReject);
  EXPECT_EQ(cell.load()->scene_id, "a");
  b.cost = 6.11;
  EXPECT_EQ(cell.offer(b), UpdateDecision::kAccept);
  EXPECT_EQ(cell.load()->scene_id, "b");
}

TEST(ExtrinsicCell, ReadersNeverSeeTornValues) {
  auto make = [](int i) {
    CalibParams p;
    p.cost = 1000.0 - i;
    p.extrinsic = RigidTransform::from_translation(Vec3(i, i, i));
    p.scene_id = std::to_string(i);
    return p;
  };
  ExtrinsicCell cell(make(0));
  std::atomic<bool> done{false};
  std::atomic<int> bad{0};
  std::thread reader([&] {
    while (!done) {
      const auto v = cell.load();
      const double t = v->extrinsic.translation().x();
      if (v->extrinsic.translation().y() != t || std::to_string(static_cast<int>(t)) != v->scene_id) ++bad;
    }
  });
  for (int i = 1; i < 2000; ++i) cell.offer(make(i), 0.5);
  done = true;
  reader.join();
  EXPECT_EQ(bad.load(), 0);
  EXPECT_EQ(cell.load()->scene_id, "1999");
}

TEST(CalibrationTrigger, SecondTriggerWhileBusyIsDropped) {
  CalibrationTrigger trigger;
  bool inner_ran = true;
  const bool outer = trigger.try_run([&] {
    EXPECT_TRUE(trigger.busy());
    inner_ran = trigger.try_run([] {});
  });
  EXPECT_TRUE(outer);
  EXPECT_FALSE(inner_ran);
  EXPECT_FALSE(trigger.busy());
  EXPECT_TRUE(trigger.try_run([] {}));
}

TEST(DetectStationary, Examples) {
  const auto still = stream(400, 200, [](double) { return RigidTransform::from_translation(Vec3(1, 2, 3)); });
  EXPECT_EQ(detect_stationary(still, 1.0, deg_to_rad(0.1), 0.005), Motion::kStationary);
  EXPECT_EQ(detect_stationary(still), Motion::kStationary);

  const auto drift = stream(400, 200, [](double t) { return RigidTransform::from_translation(Vec3(0.1 * t, 0, 0)); });
  EXPECT_EQ(detect_stationary(drift, 1.0, deg_to_rad(0.1), 0.01), Motion::kMoving);

  // 0.5 deg/s over a 2 s window turns 1 deg, five times the tolerance.
  const auto ramp = stream(600, 200, [](double t) {
    return RigidTransform::from_rotation(rotation_about_axis(Vec3::UnitZ(), deg_to_rad(0.5 * t)));
  });
  EXPECT_EQ(detect_stationary(ramp, 2.0, deg_to_rad(0.2), 0.005), Motion::kMoving);
  EXPECT_EQ(detect_stationary(ramp, 0.2, deg_to_rad(0.2), 0.005), Motion::kStationary);
}

TEST(DetectStationary, NeedsEnoughSamples) {
  const auto short_stream = stream(100, 200, [](double) { return RigidTransform(); });
  EXPECT_THROW(detect_stationary(short_stream, 1.0, 0.01, 0.01), Error);
  EXPECT_THROW(detect_stationary(std::span<const ImuSample>{}, 1.0, 0.01, 0.01), Error);
}
