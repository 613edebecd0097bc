#include <random>
#include <set>

#include <gtest/gtest.h>
#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "camvox/edgemap.hpp"

using namespace camvox;

namespace {

RasterImage step_image(int w, int h, int col, float left, float right) {
  RasterImage img(w, h);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) img.at(u, v) = u < col ? left : right;
  }
  return img;
}

// Polygons and discs over a gradient background, lightly blurred by supersampling.
RasterImage shapes_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0, 1);
  RasterImage img(w, h);
  struct Disc {
    double cu, cv, r;
    float a;
  };
  std::vector<Disc> discs;
  for (int i = 0; i < 6; ++i) {
    discs.push_back({U(rng) * w, U(rng) * h, 8 + U(rng) * h / 3, static_cast<float>(20 + 220 * U(rng))});
  }
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      double acc = 0;
      for (int s = 0; s < 4; ++s) {
        const double x = u + (s % 2) * 0.5, y = v + (s / 2) * 0.5;
        double val = 60 + 40.0 * x / w;
        if (x > w * 0.6 && y < h * 0.5 && x - w * 0.6 > y * 0.4) val = 170;
        for (const auto& d : discs) {
          if ((x - d.cu) * (x - d.cu) + (y - d.cv) * (y - d.cv) < d.r * d.r) val = d.a;
        }
        acc += val;
      }
      img.at(u, v) = static_cast<float>(acc / 4);
    }
  }
  return img;
}

cv::Mat to_mat(const RasterImage& img) {
  cv::Mat m(img.height(), img.width(), CV_32F);
  for (int v = 0; v < img.height(); ++v) {
    for (int u = 0; u < img.width(); ++u) m.at<float>(v, u) = img.at(u, v);
  }
  return m;
}

// Independent reference: OpenCV smoothing, Sobel and Canny. Gradients are scaled by 16 before
// the 16-bit conversion OpenCV requires so rounding stays well below one gray level.
cv::Mat opencv_canny(const RasterImage& img, double low, double high) {
  cv::Mat blurred, dx, dy, edges;
  cv::GaussianBlur(to_mat(img), blurred, cv::Size(5, 5), 1.4, 1.4, cv::BORDER_REPLICATE);
  cv::Sobel(blurred, dx, CV_16S, 1, 0, 3, 16.0, 0, cv::BORDER_REPLICATE);
  cv::Sobel(blurred, dy, CV_16S, 0, 1, 3, 16.0, 0, cv::BORDER_REPLICATE);
  cv::Canny(dx, dy, edges, low * 16.0, high * 16.0, true);
  return edges;
}

EdgeSegment line(int u0, int v0, int du, int dv, int n) {
  EdgeSegment s;
  for (int i = 0; i < n; ++i) s.pixels.push_back({u0 + i * du, v0 + i * dv});
  return s;
}

EdgeMap map_of(int w, int h, std::vector<EdgeSegment> segs, EdgeSource src = EdgeSource::kCamera) {
  EdgeMap m;
  m.width = w;
  m.height = h;
  m.source = src;
  m.segments = std::move(segs);
  return m;
}

// Random non-overlapping chains, re-linked so the map is valid.
EdgeMap random_edge_map(std::mt19937_64& rng, int w, int h) {
  std::uniform_int_distribution<int> U(0, w - 1), V(0, h - 1), len(1, 300), dir(0, 7), walks(1, 40);
  Raster<std::uint8_t> r(w, h, 0);
  const int n = walks(rng);
  for (int k = 0; k < n; ++k) {
    int u = U(rng), v = V(rng), d = dir(rng);
    const int l = len(rng);
    for (int i = 0; i < l; ++i) {
      if (!r.contains(u, v)) break;
      r.at(u, v) = 1;
      if (rng() % 8 == 0) d = (d + (rng() % 3) + 7) % 8;
      static constexpr int du[8] = {1, 1, 0, -1, -1, -1, 0, 1};
      static constexpr int dv[8] = {0, 1, 1, 1, 0, -1, -1, -1};
      u += du[d];
      v += dv[d];
    }
  }
  return map_of(w, h, link_edges(r));
}

std::set<std::pair<int, int>> as_set(const EdgeMap& m) {
  std::set<std::pair<int, int>> s;
  for (const auto& p : m.all_pixels()) s.insert({p.u, p.v});
  return s;
}

}  // namespace

TEST(Equalize, ConstantImage) {
  RasterImage img(20, 10, 100.0f);
  const RasterImage out = equalize_histogram(img);
  for (const float x : out.pixels()) EXPECT_EQ(x, out[0]);
}

TEST(Equalize, TwoLevelsEqualProportion) {
  RasterImage img(20, 10);
  for (int v = 0; v < 10; ++v) {
    for (int u = 0; u < 20; ++u) img.at(u, v) = u < 10 ? 50.0f : 200.0f;
  }
  const RasterImage out = equalize_histogram(img);
  // Hand-evaluated CDF: half the pixels at or below 50, all at or below 200.
  EXPECT_FLOAT_EQ(out.at(0, 0), 127.5f);
  EXPECT_FLOAT_EQ(out.at(19, 9), 255.0f);
}

TEST(Equalize, ZeroIsNoData) {
  RasterImage zero(8, 8);
  EXPECT_EQ(equalize_histogram(zero), zero);
  RasterImage sparse(8, 8);
  sparse.at(1, 1) = 3.0f;
  sparse.at(2, 2) = 7.0f;
  const RasterImage out = equalize_histogram(sparse);
  EXPECT_EQ(fill_ratio(out), fill_ratio(sparse));
  EXPECT_EQ(out.at(0, 0), 0.0f);
  EXPECT_FLOAT_EQ(out.at(2, 2), 255.0f);
}

TEST(Equalize, OutputSpansRangeAndPreservesOrder) {
  std::mt19937_64 rng(20);
  std::uniform_real_distribution<float> d(0.5f, 70.0f);
  RasterImage img(64, 64);
  for (auto& x : img.pixels()) x = d(rng);
  const RasterImage out = equalize_histogram(img);
  float lo = 255, hi = 0;
  for (const float x : out.pixels()) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  EXPECT_GT(lo, 0.0f);
  EXPECT_FLOAT_EQ(hi, 255.0f);
  for (std::size_t i = 1; i < img.size(); ++i) {
    if (img[i] < img[i - 1]) {
      EXPECT_LE(out[i], out[i - 1]);
    }
  }
}

TEST(DetectEdges, AllZeroImage) {
  const RasterImage img(50, 40);
  EXPECT_TRUE(detect_edges(img, 10, 20).segments.empty());
  EXPECT_TRUE(detect_edges(img).segments.empty());
}

TEST(DetectEdges, RejectsBadThresholds) {
  const RasterImage img(10, 10);
  EXPECT_THROW(detect_edges(img, 0, 10), Error);
  EXPECT_THROW(detect_edges(img, 20, 10), Error);
}

TEST(DetectEdges, VerticalStepGivesOneSegment) {
  const RasterImage img = step_image(200, 120, 100, 50, 200);
  for (const EdgeMap& e : {detect_edges(img, 40, 100), detect_edges(img)}) {
    ASSERT_EQ(e.segments.size(), 1u);
    EXPECT_NEAR(static_cast<double>(e.segments[0].length()), 120.0, 2.0);
    for (const auto& p : e.segments[0].pixels) EXPECT_NEAR(p.u, 99.5, 1.0);
    EXPECT_NO_THROW(e.validate());
  }
}

TEST(DetectEdges, StepMatchesOpenCv) {
  const RasterImage img = step_image(200, 120, 100, 50, 200);
  const auto ours = canny(img, {40, 100});
  const cv::Mat ref = opencv_canny(img, 40, 100);
  for (int v = 2; v < 118; ++v) {
    for (int u = 2; u < 198; ++u) EXPECT_EQ(ours.at(u, v) != 0, ref.at<std::uint8_t>(v, u) != 0) << u << "," << v;
  }
}

TEST(DetectEdges, ShapesMatchOpenCv) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const RasterImage img = shapes_image(320, 200, seed);
    const auto th = adaptive_thresholds(img);
    ASSERT_GT(th.low, 0.0);
    const auto ours = canny(img, th);
    const cv::Mat ref = opencv_canny(img, th.low, th.high);
    std::size_t differ = 0, total = 0;
    for (int v = 2; v < img.height() - 2; ++v) {
      for (int u = 2; u < img.width() - 2; ++u) {
        const bool a = ours.at(u, v) != 0, b = ref.at<std::uint8_t>(v, u) != 0;
        differ += a != b;
        total += a || b;
      }
    }
    ASSERT_GT(total, 500u);
    // Only threshold and direction-bin ties may disagree.
    EXPECT_LE(static_cast<double>(differ), 0.005 * static_cast<double>(total)) << "seed " << seed;
  }
}

TEST(DetectEdges, NoisyStepStaysOnEdge) {
  std::mt19937_64 rng(21);
  std::normal_distribution<float> noise(0.0f, 2.0f);
  RasterImage img = step_image(200, 120, 100, 60, 190);
  for (auto& x : img.pixels()) x = std::clamp(x + noise(rng), 0.0f, 255.0f);
  const EdgeMap e = detect_edges(img, 40, 100);
  ASSERT_FALSE(e.segments.empty());
  std::size_t longest = 0;
  for (const auto& s : e.segments) {
    longest = std::max(longest, s.length());
    for (const auto& p : s.pixels) EXPECT_LE(std::abs(p.u - 99.5), 2.0);
  }
  EXPECT_GE(longest, 110u);
}

TEST(DetectEdges, HalfTurnSymmetry) {
  const RasterImage img = shapes_image(240, 160, 7);
  RasterImage rot(img.width(), img.height());
  const int w = img.width(), h = img.height();
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) rot.at(w - 1 - u, h - 1 - v) = img.at(u, v);
  }
  const auto th = adaptive_thresholds(img);
  const auto a = canny(img, th);
  const auto b = canny(rot, th);
  auto near = [](const Raster<std::uint8_t>& r, int u, int v) {
    for (int dv = -1; dv <= 1; ++dv) {
      for (int du = -1; du <= 1; ++du) {
        if (r.contains(u + du, v + dv) && r.at(u + du, v + dv)) return true;
      }
    }
    return false;
  };
  std::size_t checked = 0;
  for (int v = 3; v < h - 3; ++v) {
    for (int u = 3; u < w - 3; ++u) {
      if (a.at(u, v)) {
        EXPECT_TRUE(near(b, w - 1 - u, h - 1 - v)) << u << "," << v;
        ++checked;
      }
      if (b.at(u, v)) {
        EXPECT_TRUE(near(a, w - 1 - u, h - 1 - v)) << u << "," << v;
      }
    }
  }
  EXPECT_GT(checked, 300u);
}

TEST(AdaptiveThresholds, FromMagnitudePercentile) {
  const RasterImage img = shapes_image(160, 100, 3);
  const RasterImage mag = gradient_magnitude(img);
  std::vector<float> nz;
  for (const float m : mag.pixels()) {
    if (m > 1e-3f) nz.push_back(m);
  }
  std::sort(nz.begin(), nz.end());
  const double p90 = nz[static_cast<std::size_t>(0.9 * static_cast<double>(nz.size() - 1))];
  const auto th = adaptive_thresholds(img);
  EXPECT_DOUBLE_EQ(th.high, p90);
  EXPECT_DOUBLE_EQ(th.low, 0.4 * p90);
}

TEST(LinkEdges, ChainsAreValidAndCoverTheRaster) {
  std::mt19937_64 rng(22);
  for (int k = 0; k < 50; ++k) {
    Raster<std::uint8_t> r(60, 40, 0);
    for (auto& x : r.pixels()) x = rng() % 5 == 0;
    const EdgeMap m = map_of(60, 40, link_edges(r));
    EXPECT_NO_THROW(m.validate());
    EXPECT_EQ(rasterize(m), r);
    EXPECT_EQ(link_edges(r).size(), m.segments.size());
  }
}

TEST(LinkEdges, StraightLineIsOneChainInOrder) {
  Raster<std::uint8_t> r(30, 30, 0);
  for (int i = 3; i < 25; ++i) r.at(i, i) = 1;
  const auto segs = link_edges(r);
  ASSERT_EQ(segs.size(), 1u);
  EXPECT_EQ(segs[0].length(), 22u);
  EXPECT_EQ(segs[0].pixels.front(), (Pixel{3, 3}));
  EXPECT_EQ(segs[0].pixels.back(), (Pixel{24, 24}));
}

TEST(EdgeMapValidate, RejectsBrokenMaps) {
  EXPECT_THROW(map_of(10, 10, {line(0, 0, 2, 0, 3)}).validate(), Error);
  EXPECT_THROW(map_of(10, 10, {line(8, 0, 1, 0, 3)}).validate(), Error);
  EXPECT_THROW(map_of(10, 10, {line(0, 0, 1, 0, 3), line(2, 0, 0, 1, 3)}).validate(), Error);
  EXPECT_THROW(map_of(10, 10, {EdgeSegment{}}).validate(), Error);
}

TEST(FilterEdges, LengthRule) {
  const EdgeMap m = map_of(400, 100, {line(10, 10, 1, 0, 150), line(10, 60, 1, 0, 250)});
  const EdgeMap out = filter_edges(m, 200, 10, 20);
  ASSERT_EQ(out.segments.size(), 1u);
  EXPECT_EQ(out.segments[0].length(), 250u);
  const EdgeMap seg = filter_edges(m, 200, 10, 20, EdgeGrouping::kSegment);
  ASSERT_EQ(seg.segments.size(), 1u);
  EXPECT_EQ(seg.segments[0].length(), 250u);
}

TEST(FilterEdges, Empty) {
  const EdgeMap m = map_of(10, 10, {});
  EXPECT_TRUE(filter_edges(m, 200, 10, 20).segments.empty());
  EXPECT_THROW(filter_edges(m, 0.5, 10, 20), Error);
}

TEST(FilterEdges, ClutterGridIsRemoved) {
  std::vector<EdgeSegment> segs;
  for (int i = 0; i < 20; ++i) segs.push_back(line(20 + 5 * i, 20, 0, 1, 60));
  segs.push_back(line(200, 150, 1, 0, 260));
  const EdgeMap m = map_of(500, 200, segs);
  const EdgeMap out = filter_edges(m, EdgeFilterConfig{});
  ASSERT_EQ(out.segments.size(), 1u);
  EXPECT_EQ(out.segments[0].length(), 260u);
}

TEST(FilterEdges, ClutterRuleAloneDropsInteriorLines) {
  std::vector<EdgeSegment> segs;
  for (int i = 0; i < 20; ++i) segs.push_back(line(20 + 5 * i, 20, 0, 1, 60));
  segs.push_back(line(200, 150, 1, 0, 260));
  const EdgeMap m = map_of(500, 200, segs);
  // Length rule off. Interior lines see two neighbours at 5 px (about 36 pixels each); the two
  // outermost see one side only (18) and stay.
  const EdgeMap out = filter_edges(m, 1, 10, 20);
  std::set<int> cols;
  for (const auto& s : out.segments) cols.insert(s.pixels[0].u);
  EXPECT_EQ(cols, (std::set<int>{20, 115, 200}));
}

TEST(FilterEdges, ContourGroupingJudgesJunctionsTogether) {
  // An L split into two chains of 120: each is short alone, the contour is long.
  EdgeMap m = map_of(300, 300, {line(50, 50, 1, 0, 120), line(50, 51, 0, 1, 120)});
  EXPECT_EQ(filter_edges(m, 200, 10, 20, EdgeGrouping::kContour).segments.size(), 2u);
  EXPECT_EQ(filter_edges(m, 200, 10, 20, EdgeGrouping::kSegment).segments.size(), 0u);
  // A gap of three pixels still joins; five does not.
  m.segments[1] = line(50, 54, 0, 1, 120);
  EXPECT_EQ(filter_edges(m, 200, 10, 20, EdgeGrouping::kContour, 4).segments.size(), 2u);
  m.segments[1] = line(50, 56, 0, 1, 120);
  EXPECT_EQ(filter_edges(m, 200, 10, 20, EdgeGrouping::kContour, 4).segments.size(), 0u);
}

TEST(FilterEdges, SubsetAndIdempotentOnRandomMaps) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> len(1, 120), rad(0, 12), cnt(0, 30);
  for (int k = 0; k < 100; ++k) {
    const EdgeMap m = random_edge_map(rng, 160, 120);
    const double L = len(rng), r = rad(rng), c = cnt(rng);
    const auto g = k % 2 ? EdgeGrouping::kSegment : EdgeGrouping::kContour;
    const EdgeMap once = filter_edges(m, L, r, c, g);
    const EdgeMap twice = filter_edges(once, L, r, c, g);
    ASSERT_EQ(once.segments.size(), twice.segments.size()) << "map " << k;
    for (std::size_t i = 0; i < once.segments.size(); ++i) {
      EXPECT_EQ(once.segments[i].pixels, twice.segments[i].pixels);
    }
    // Every output segment is an input segment.
    for (const auto& s : once.segments) {
      EXPECT_TRUE(std::any_of(m.segments.begin(), m.segments.end(),
                              [&](const EdgeSegment& t) { return t.pixels == s.pixels; }));
    }
  }
}

TEST(FilterEdges, ScaledLengthFollowsDiagonal) {
  EXPECT_EQ(scaled_filter({}, 1520, 568).min_length, 200.0);
  EXPECT_EQ(scaled_filter({}, 760, 284).min_length, 100.0);
  EXPECT_NEAR(scale_to_resolution(30, 3040, 1136), 60.0, 1e-12);
}

TEST(MergeEdges, UnionLaws) {
  std::mt19937_64 rng(24);
  for (int k = 0; k < 30; ++k) {
    const EdgeMap x = random_edge_map(rng, 120, 90);
    const EdgeMap y = random_edge_map(rng, 120, 90);
    const EdgeMap empty = map_of(120, 90, {});
    EXPECT_EQ(merge_edge_maps(x, empty).pixel_set(), x.pixel_set());
    EXPECT_EQ(merge_edge_maps(x, x).pixel_set(), x.pixel_set());
    const EdgeMap xy = merge_edge_maps(x, y);
    EXPECT_EQ(xy.pixel_set(), merge_edge_maps(y, x).pixel_set());
    auto expected = as_set(x);
    for (const auto& p : as_set(y)) expected.insert(p);
    EXPECT_EQ(as_set(xy), expected);
    EXPECT_EQ(xy.pixel_count(), expected.size());
    EXPECT_NO_THROW(xy.validate());
    EXPECT_EQ(xy.source, EdgeSource::kLidar);
  }
}

TEST(MergeEdges, DisjointSegmentsBothKept) {
  const EdgeMap a = map_of(50, 50, {line(5, 5, 1, 0, 10)});
  const EdgeMap b = map_of(50, 50, {line(5, 30, 0, 1, 10)});
  const EdgeMap m = merge_edge_maps(a, b);
  ASSERT_EQ(m.segments.size(), 2u);
  EXPECT_EQ(m.pixel_count(), 20u);
}

TEST(MergeEdges, SizeMismatch) {
  EXPECT_THROW(merge_edge_maps(map_of(10, 10, {}), map_of(10, 11, {})), Error);
}

TEST(CleanEdges, ThinsAndPrunesSpurs) {
  Raster<std::uint8_t> r(80, 40, 0);
  for (int u = 5; u < 75; ++u) {
    r.at(u, 20) = 1;
    r.at(u, 21) = 1;  // two pixels thick
  }
  for (int v = 14; v < 20; ++v) r.at(40, v) = 1;  // short spur
  for (int v = 22; v < 38; ++v) r.at(60, v) = 1;  // long branch
  const EdgeMap m = map_of(80, 40, link_edges(r), EdgeSource::kLidar);

  const EdgeMap thin = thin_edge_map(m);
  EXPECT_NO_THROW(thin.validate());
  EXPECT_LT(thin.pixel_count(), m.pixel_count());
  const auto tr = rasterize(thin);
  for (int u = 8; u < 72; ++u) {
    if (std::abs(u - 40) > 1 && std::abs(u - 60) > 1) {
      EXPECT_EQ(tr.at(u, 20) + tr.at(u, 21), 1) << u;
    }
  }

  const EdgeMap clean = clean_edge_map(m, 8);
  const auto cr = rasterize(clean);
  for (int v = 14; v < 19; ++v) EXPECT_EQ(cr.at(40, v), 0) << v;
  int branch = 0;
  for (int v = 23; v < 38; ++v) branch += cr.at(60, v);
  EXPECT_GE(branch, 14);
  EXPECT_EQ(clean.source, EdgeSource::kLidar);
}

TEST(Pipelines, CameraStepImage) {
  const RasterImage img = step_image(400, 300, 200, 40, 200);
  const EdgeMap e = camera_edge_pipeline(img);
  ASSERT_EQ(e.segments.size(), 1u);
  EXPECT_EQ(e.source, EdgeSource::kCamera);
  EXPECT_GE(e.segments[0].length(), 290u);
}

TEST(Pipelines, LidarSparseRastersAreFilled) {
  // Depth step seen through a sparse sampling mask.
  std::mt19937_64 rng(25);
  RasterImage depth(400, 300), refl(400, 300);
  for (int v = 0; v < 300; ++v) {
    for (int u = 0; u < 400; ++u) {
      if (rng() % 2) continue;
      depth.at(u, v) = u < 200 ? 10.0f : 30.0f;
      refl.at(u, v) = 100.0f;
    }
  }
  const EdgeMap e = lidar_edge_pipeline(depth, refl);
  EXPECT_EQ(e.source, EdgeSource::kLidar);
  ASSERT_FALSE(e.segments.empty());
  std::size_t on_step = 0;
  for (const auto& p : e.all_pixels()) on_step += std::abs(p.u - 199.5) <= 2.0;
  EXPECT_GE(on_step, 250u);
  EXPECT_EQ(on_step, e.pixel_count());
  EXPECT_THROW(lidar_edge_pipeline(depth, RasterImage(10, 10)), Error);
}

TEST(HoleFill, MedianOfNeighbours) {
  RasterImage img(5, 5, 4.0f);
  img.at(2, 2) = 0.0f;
  img.at(1, 1) = 1.0f;
  const RasterImage out = fill_holes_by_median(img, 1);
  EXPECT_EQ(out.at(2, 2), 4.0f);
  EXPECT_EQ(out.at(1, 1), 1.0f);
  RasterImage lone(5, 5);
  lone.at(0, 0) = 9.0f;
  EXPECT_EQ(fill_holes_by_median(lone, 10), lone);
}

TEST(HoleFill, ClosingOnlyTouchesNoData) {
  RasterImage img(6, 6, 5.0f);
  img.at(3, 3) = 0.0f;
  img.at(1, 1) = 2.0f;
  const RasterImage out = fill_holes_by_closing(img);
  EXPECT_EQ(out.at(3, 3), 5.0f);
  EXPECT_EQ(out.at(1, 1), 2.0f);
}
