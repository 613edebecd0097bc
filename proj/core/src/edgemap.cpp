#include "camvox/edgemap.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace camvox {

namespace {

constexpr std::array<std::array<int, 2>, 8> kDirs = {{{1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}}};

// Order in which turns away from the current heading are tried.
constexpr std::array<int, 8> kTurnOrder = {0, 1, -1, 2, -2, 3, -3, 4};

std::vector<float> gaussian_kernel(double sigma, int size) {
  std::vector<float> k(static_cast<std::size_t>(size));
  const int r = size / 2;
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    const double w = std::exp(-(i * i) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(i + r)] = static_cast<float>(w);
    sum += w;
  }
  for (auto& w : k) w = static_cast<float>(w / sum);
  return k;
}

RasterImage smooth(const RasterImage& img, const CannyConfig& cfg) {
  if (cfg.kernel_size < 1 || cfg.kernel_size % 2 == 0) throw_input_error("Gaussian kernel size must be odd and positive");
  if (!(cfg.sigma > 0.0)) throw_input_error("Gaussian sigma must be positive");
  const auto k = gaussian_kernel(cfg.sigma, cfg.kernel_size);
  const int r = cfg.kernel_size / 2;
  const int w = img.width();
  const int h = img.height();
  RasterImage tmp(w, h);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      float acc = 0.0f;
      for (int i = -r; i <= r; ++i) acc += k[static_cast<std::size_t>(i + r)] * img.at(std::clamp(u + i, 0, w - 1), v);
      tmp.at(u, v) = acc;
    }
  }
  RasterImage out(w, h);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      float acc = 0.0f;
      for (int i = -r; i <= r; ++i) acc += k[static_cast<std::size_t>(i + r)] * tmp.at(u, std::clamp(v + i, 0, h - 1));
      out.at(u, v) = acc;
    }
  }
  return out;
}

struct Gradients {
  RasterImage gx;
  RasterImage gy;
  RasterImage mag;
};

Gradients sobel(const RasterImage& s) {
  const int w = s.width();
  const int h = s.height();
  Gradients g{RasterImage(w, h), RasterImage(w, h), RasterImage(w, h)};
  auto px = [&](int u, int v) { return s.at(std::clamp(u, 0, w - 1), std::clamp(v, 0, h - 1)); };
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const float gx = (px(u + 1, v - 1) + 2.0f * px(u + 1, v) + px(u + 1, v + 1)) -
                       (px(u - 1, v - 1) + 2.0f * px(u - 1, v) + px(u - 1, v + 1));
      const float gy = (px(u - 1, v + 1) + 2.0f * px(u, v + 1) + px(u + 1, v + 1)) -
                       (px(u - 1, v - 1) + 2.0f * px(u, v - 1) + px(u + 1, v - 1));
      g.gx.at(u, v) = gx;
      g.gy.at(u, v) = gy;
      g.mag.at(u, v) = std::sqrt(gx * gx + gy * gy);
    }
  }
  return g;
}

// Magnitudes below this are float noise from smoothing flat regions.
constexpr float kMagnitudeFloor = 1e-3f;

CannyThresholds thresholds_from_magnitude(const RasterImage& mag, const CannyConfig& cfg) {
  std::vector<float> nz;
  nz.reserve(mag.size() / 4);
  for (const float m : mag.pixels()) {
    if (m > kMagnitudeFloor) nz.push_back(m);
  }
  if (nz.empty()) return {};
  const auto k = static_cast<std::size_t>(std::clamp(cfg.percentile, 0.0, 1.0) * static_cast<double>(nz.size() - 1));
  std::nth_element(nz.begin(), nz.begin() + static_cast<std::ptrdiff_t>(k), nz.end());
  const double p = nz[k];
  return {cfg.low_ratio * p, cfg.high_ratio * p};
}

Raster<std::uint8_t> canny_from_gradients(const Gradients& g, CannyThresholds th) {
  const int w = g.mag.width();
  const int h = g.mag.height();
  constexpr float kTan22 = 0.41421356f;
  constexpr float kTan67 = 2.41421356f;

  // 0 = suppressed, 1 = weak candidate, 2 = strong.
  Raster<std::uint8_t> state(w, h, 0);
  auto mag = [&](int u, int v) { return g.mag.contains(u, v) ? g.mag.at(u, v) : 0.0f; };
  for (int v = 1; v < h - 1; ++v) {
    for (int u = 1; u < w - 1; ++u) {
      const float m = g.mag.at(u, v);
      if (!(m > th.low) || m <= kMagnitudeFloor) continue;
      const float ax = std::abs(g.gx.at(u, v));
      const float ay = std::abs(g.gy.at(u, v));
      float before = 0.0f;
      float after = 0.0f;
      if (ay <= kTan22 * ax) {
        before = mag(u - 1, v);
        after = mag(u + 1, v);
      } else if (ay >= kTan67 * ax) {
        before = mag(u, v - 1);
        after = mag(u, v + 1);
      } else if ((g.gx.at(u, v) > 0) == (g.gy.at(u, v) > 0)) {
        before = mag(u - 1, v - 1);
        after = mag(u + 1, v + 1);
      } else {
        before = mag(u + 1, v - 1);
        after = mag(u - 1, v + 1);
      }
      if (m > before && m >= after) state.at(u, v) = m >= th.high ? 2 : 1;
    }
  }

  Raster<std::uint8_t> edges(w, h, 0);
  std::vector<Pixel> stack;
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      if (state.at(u, v) != 2 || edges.at(u, v)) continue;
      edges.at(u, v) = 1;
      stack.push_back({u, v});
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        for (const auto& d : kDirs) {
          const int uu = p.u + d[0];
          const int vv = p.v + d[1];
          if (!state.contains(uu, vv) || state.at(uu, vv) == 0 || edges.at(uu, vv)) continue;
          edges.at(uu, vv) = 1;
          stack.push_back({uu, vv});
        }
      }
    }
  }
  return edges;
}

// Follows unvisited edge pixels from `from`, preferring the smallest turn from `heading`.
void trace(const Raster<std::uint8_t>& edges, Raster<std::uint8_t>& visited, Pixel from, int heading,
           std::vector<Pixel>& out) {
  Pixel cur = from;
  while (true) {
    int next_dir = -1;
    if (heading < 0) {
      for (int d = 0; d < 8; ++d) {
        const int uu = cur.u + kDirs[static_cast<std::size_t>(d)][0];
        const int vv = cur.v + kDirs[static_cast<std::size_t>(d)][1];
        if (edges.contains(uu, vv) && edges.at(uu, vv) && !visited.at(uu, vv)) {
          next_dir = d;
          break;
        }
      }
    } else {
      for (const int turn : kTurnOrder) {
        const int d = (heading + turn + 8) % 8;
        const int uu = cur.u + kDirs[static_cast<std::size_t>(d)][0];
        const int vv = cur.v + kDirs[static_cast<std::size_t>(d)][1];
        if (edges.contains(uu, vv) && edges.at(uu, vv) && !visited.at(uu, vv)) {
          next_dir = d;
          break;
        }
      }
    }
    if (next_dir < 0) return;
    cur = {cur.u + kDirs[static_cast<std::size_t>(next_dir)][0], cur.v + kDirs[static_cast<std::size_t>(next_dir)][1]};
    visited.at(cur.u, cur.v) = 1;
    out.push_back(cur);
    heading = next_dir;
  }
}

void check_thresholds(double low, double high) {
  if (!(low > 0.0) || !(high >= low)) {
    std::ostringstream os;
    os << "Canny thresholds must satisfy high >= low > 0 (low=" << low << ", high=" << high << ")";
    throw_input_error(os.str());
  }
}

}  // namespace

std::size_t EdgeMap::pixel_count() const {
  std::size_t n = 0;
  for (const auto& s : segments) n += s.length();
  return n;
}

std::vector<Pixel> EdgeMap::all_pixels() const {
  std::vector<Pixel> out;
  out.reserve(pixel_count());
  for (const auto& s : segments) out.insert(out.end(), s.pixels.begin(), s.pixels.end());
  return out;
}

std::vector<Pixel> EdgeMap::pixel_set() const {
  auto px = all_pixels();
  std::sort(px.begin(), px.end());
  px.erase(std::unique(px.begin(), px.end()), px.end());
  return px;
}

void EdgeMap::validate() const {
  Raster<std::uint8_t> seen(width, height, 0);
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const auto& px = segments[s].pixels;
    std::ostringstream os;
    if (px.empty()) {
      os << "segment " << s << " is empty";
      throw_input_error(os.str());
    }
    for (std::size_t i = 0; i < px.size(); ++i) {
      if (!seen.contains(px[i].u, px[i].v)) {
        os << "segment " << s << " pixel (" << px[i].u << ", " << px[i].v << ") outside " << width << "x" << height;
        throw_input_error(os.str());
      }
      if (seen.at(px[i].u, px[i].v)) {
        os << "pixel (" << px[i].u << ", " << px[i].v << ") appears twice";
        throw_input_error(os.str());
      }
      seen.at(px[i].u, px[i].v) = 1;
      if (i > 0 && (std::abs(px[i].u - px[i - 1].u) > 1 || std::abs(px[i].v - px[i - 1].v) > 1)) {
        os << "segment " << s << " breaks 8-connectivity at index " << i;
        throw_input_error(os.str());
      }
    }
  }
}

double reference_diagonal() { return std::hypot(1520.0, 568.0); }

double scale_to_resolution(double reference_px, int width, int height) {
  return reference_px * std::hypot(static_cast<double>(width), static_cast<double>(height)) / reference_diagonal();
}

RasterImage equalize_histogram(const RasterImage& img) {
  constexpr int kBins = 4096;
  float lo = 0.0f;
  float hi = 0.0f;
  std::size_t n = 0;
  for (const float x : img.pixels()) {
    if (x == 0.0f) continue;
    if (n == 0) lo = hi = x;
    lo = std::min(lo, x);
    hi = std::max(hi, x);
    ++n;
  }
  if (n == 0) return img;

  const double scale = hi > lo ? (kBins - 1) / static_cast<double>(hi - lo) : 0.0;
  auto bin_of = [&](float x) {
    return std::clamp(static_cast<int>(std::floor((x - lo) * scale + 0.5)), 0, kBins - 1);
  };
  std::vector<std::size_t> cdf(kBins, 0);
  for (const float x : img.pixels()) {
    if (x != 0.0f) ++cdf[static_cast<std::size_t>(bin_of(x))];
  }
  for (int i = 1; i < kBins; ++i) cdf[static_cast<std::size_t>(i)] += cdf[static_cast<std::size_t>(i - 1)];

  RasterImage out(img.width(), img.height());
  const double norm = 255.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (img[i] == 0.0f) continue;
    out[i] = static_cast<float>(norm * static_cast<double>(cdf[static_cast<std::size_t>(bin_of(img[i]))]));
  }
  return out;
}

RasterImage gradient_magnitude(const RasterImage& img, const CannyConfig& cfg) { return sobel(smooth(img, cfg)).mag; }

CannyThresholds adaptive_thresholds(const RasterImage& img, const CannyConfig& cfg) {
  return thresholds_from_magnitude(gradient_magnitude(img, cfg), cfg);
}

Raster<std::uint8_t> canny(const RasterImage& img, CannyThresholds thresholds, const CannyConfig& cfg) {
  check_thresholds(thresholds.low, thresholds.high);
  return canny_from_gradients(sobel(smooth(img, cfg)), thresholds);
}

std::vector<EdgeSegment> link_edges(const Raster<std::uint8_t>& edges) {
  std::vector<EdgeSegment> segments;
  Raster<std::uint8_t> visited(edges.width(), edges.height(), 0);
  std::vector<Pixel> forward;
  std::vector<Pixel> backward;
  for (int v = 0; v < edges.height(); ++v) {
    for (int u = 0; u < edges.width(); ++u) {
      if (!edges.at(u, v) || visited.at(u, v)) continue;
      visited.at(u, v) = 1;
      forward.clear();
      backward.clear();
      trace(edges, visited, {u, v}, -1, forward);
      int back_heading = -1;
      if (!forward.empty()) {
        for (int d = 0; d < 8; ++d) {
          if (kDirs[static_cast<std::size_t>(d)][0] == forward[0].u - u &&
              kDirs[static_cast<std::size_t>(d)][1] == forward[0].v - v) {
            back_heading = (d + 4) % 8;
          }
        }
      }
      trace(edges, visited, {u, v}, back_heading, backward);
      EdgeSegment seg;
      seg.pixels.reserve(forward.size() + backward.size() + 1);
      seg.pixels.assign(backward.rbegin(), backward.rend());
      seg.pixels.push_back({u, v});
      seg.pixels.insert(seg.pixels.end(), forward.begin(), forward.end());
      segments.push_back(std::move(seg));
    }
  }
  return segments;
}

EdgeMap detect_edges(const RasterImage& img, double low, double high, const CannyConfig& cfg, EdgeSource source) {
  check_thresholds(low, high);
  EdgeMap out;
  out.source = source;
  out.width = img.width();
  out.height = img.height();
  out.segments = link_edges(canny(img, {low, high}, cfg));
  return out;
}

EdgeMap detect_edges(const RasterImage& img, const CannyConfig& cfg, EdgeSource source) {
  EdgeMap out;
  out.source = source;
  out.width = img.width();
  out.height = img.height();
  const Gradients g = sobel(smooth(img, cfg));
  const CannyThresholds th = thresholds_from_magnitude(g.mag, cfg);
  if (!(th.low > 0.0)) return out;
  out.segments = link_edges(canny_from_gradients(g, th));
  return out;
}

EdgeMap filter_edges(const EdgeMap& edges, double min_length, double clutter_radius, double clutter_count,
                     EdgeGrouping grouping, int contour_gap) {
  if (!(min_length >= 1.0)) throw_input_error("min_length must be at least 1 pixel");
  if (!(clutter_radius >= 0.0)) throw_input_error("clutter_radius must be non-negative");
  if (contour_gap < 1) throw_input_error("contour_gap must be at least 1 pixel");
  const auto n_seg = edges.segments.size();

  // Group id per segment: the segment itself, or the contour of segments reaching each other
  // within contour_gap pixels (Chebyshev).
  std::vector<std::size_t> group(n_seg);
  std::size_t n_groups = n_seg;
  for (std::size_t i = 0; i < n_seg; ++i) group[i] = i;
  if (grouping == EdgeGrouping::kContour && n_seg > 0) {
    Raster<std::int32_t> owner(edges.width, edges.height, -1);
    for (std::size_t i = 0; i < n_seg; ++i) {
      for (const auto& p : edges.segments[i].pixels) owner.at(p.u, p.v) = static_cast<std::int32_t>(i);
    }
    constexpr auto kUnset = std::numeric_limits<std::size_t>::max();
    std::fill(group.begin(), group.end(), kUnset);
    n_groups = 0;
    std::vector<std::array<int, 2>> reach;
    for (int dv = -contour_gap; dv <= contour_gap; ++dv) {
      for (int du = -contour_gap; du <= contour_gap; ++du) {
        if (du != 0 || dv != 0) reach.push_back({du, dv});
      }
    }
    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < n_seg; ++i) {
      if (group[i] != kUnset) continue;
      group[i] = n_groups;
      stack.push_back(i);
      while (!stack.empty()) {
        const std::size_t k = stack.back();
        stack.pop_back();
        for (const auto& p : edges.segments[k].pixels) {
          for (const auto& d : reach) {
            if (!owner.contains(p.u + d[0], p.v + d[1])) continue;
            const auto o = owner.at(p.u + d[0], p.v + d[1]);
            if (o < 0 || group[static_cast<std::size_t>(o)] != kUnset) continue;
            group[static_cast<std::size_t>(o)] = n_groups;
            stack.push_back(static_cast<std::size_t>(o));
          }
        }
      }
      ++n_groups;
    }
  }

  std::vector<std::size_t> size(n_groups, 0);
  for (std::size_t i = 0; i < n_seg; ++i) size[group[i]] += edges.segments[i].length();
  std::vector<bool> keep(n_groups);
  for (std::size_t g = 0; g < n_groups; ++g) keep[g] = static_cast<double>(size[g]) >= min_length;

  Raster<std::int32_t> label(edges.width, edges.height, -1);
  for (std::size_t i = 0; i < n_seg; ++i) {
    if (!keep[group[i]]) continue;
    for (const auto& p : edges.segments[i].pixels) label.at(p.u, p.v) = static_cast<std::int32_t>(group[i]);
  }
  std::vector<std::array<int, 2>> disc;
  const int r = static_cast<int>(std::floor(clutter_radius));
  for (int dv = -r; dv <= r; ++dv) {
    for (int du = -r; du <= r; ++du) {
      if ((du != 0 || dv != 0) && du * du + dv * dv <= clutter_radius * clutter_radius) disc.push_back({du, dv});
    }
  }
  std::vector<std::size_t> neighbours(n_groups, 0);
  for (std::size_t i = 0; i < n_seg; ++i) {
    const auto own = static_cast<std::int32_t>(group[i]);
    if (!keep[group[i]]) continue;
    for (const auto& p : edges.segments[i].pixels) {
      for (const auto& d : disc) {
        const int uu = p.u + d[0];
        const int vv = p.v + d[1];
        if (!label.contains(uu, vv)) continue;
        const auto l = label.at(uu, vv);
        if (l >= 0 && l != own) ++neighbours[group[i]];
      }
    }
  }

  EdgeMap out;
  out.source = edges.source;
  out.width = edges.width;
  out.height = edges.height;
  for (std::size_t i = 0; i < n_seg; ++i) {
    const std::size_t g = group[i];
    if (!keep[g]) continue;
    const double mean = static_cast<double>(neighbours[g]) / static_cast<double>(size[g]);
    if (mean <= clutter_count) out.segments.push_back(edges.segments[i]);
  }
  return out;
}

Raster<std::uint8_t> rasterize(const EdgeMap& edges) {
  Raster<std::uint8_t> r(edges.width, edges.height, 0);
  for (const auto& s : edges.segments) {
    for (const auto& p : s.pixels) r.at(p.u, p.v) = 1;
  }
  return r;
}

EdgeMap merge_edge_maps(const EdgeMap& depth_edges, const EdgeMap& refl_edges) {
  if (depth_edges.width != refl_edges.width || depth_edges.height != refl_edges.height) {
    std::ostringstream os;
    os << "cannot merge edge maps of different sizes (" << depth_edges.width << "x" << depth_edges.height << " vs "
       << refl_edges.width << "x" << refl_edges.height << ")";
    throw_input_error(os.str());
  }
  Raster<std::uint8_t> r = rasterize(depth_edges);
  for (const auto& s : refl_edges.segments) {
    for (const auto& p : s.pixels) r.at(p.u, p.v) = 1;
  }
  EdgeMap out;
  out.source = EdgeSource::kLidar;
  out.width = depth_edges.width;
  out.height = depth_edges.height;
  out.segments = link_edges(r);
  return out;
}

EdgeFilterConfig scaled_filter(const EdgeFilterConfig& cfg, int width, int height) {
  EdgeFilterConfig out = cfg;
  out.min_length = std::max(1.0, std::round(scale_to_resolution(cfg.min_length, width, height)));
  return out;
}

namespace {

EdgeMap detect_with(const RasterImage& img, const std::optional<CannyThresholds>& th, const CannyConfig& cfg,
                    EdgeSource source) {
  if (th) return detect_edges(img, th->low, th->high, cfg, source);
  return detect_edges(img, cfg, source);
}

}  // namespace

EdgeMap camera_edge_pipeline(const RasterImage& gray, const EdgePipelineConfig& cfg) {
  EdgeMap raw = detect_with(equalize_histogram(gray), cfg.camera_thresholds, cfg.canny, EdgeSource::kCamera);
  if (cfg.clean) raw = clean_edge_map(raw, cfg.spur_length);
  return filter_edges(raw, scaled_filter(cfg.filter, gray.width(), gray.height()));
}

namespace {

void zhang_suen(Raster<std::uint8_t>& img) {
  const int w = img.width();
  const int h = img.height();
  auto at = [&](int u, int v) -> int { return img.contains(u, v) && img.at(u, v) ? 1 : 0; };
  std::vector<Pixel> remove;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int step = 0; step < 2; ++step) {
      remove.clear();
      for (int v = 0; v < h; ++v) {
        for (int u = 0; u < w; ++u) {
          if (!img.at(u, v)) continue;
          // Neighbours clockwise from north.
          const std::array<int, 8> p = {at(u, v - 1), at(u + 1, v - 1), at(u + 1, v), at(u + 1, v + 1),
                                        at(u, v + 1), at(u - 1, v + 1), at(u - 1, v), at(u - 1, v - 1)};
          int b = 0;
          int a = 0;
          for (int k = 0; k < 8; ++k) {
            b += p[static_cast<std::size_t>(k)];
            a += (!p[static_cast<std::size_t>(k)] && p[static_cast<std::size_t>((k + 1) % 8)]) ? 1 : 0;
          }
          if (b < 2 || b > 6 || a != 1) continue;
          const bool ok = step == 0 ? (!(p[0] && p[2] && p[4]) && !(p[2] && p[4] && p[6]))
                                    : (!(p[0] && p[2] && p[6]) && !(p[0] && p[4] && p[6]));
          if (ok) remove.push_back({u, v});
        }
      }
      for (const auto& q : remove) img.at(q.u, q.v) = 0;
      changed = changed || !remove.empty();
    }
  }
}

int neighbour_count(const Raster<std::uint8_t>& img, Pixel p) {
  int n = 0;
  for (const auto& d : kDirs) {
    if (img.contains(p.u + d[0], p.v + d[1]) && img.at(p.u + d[0], p.v + d[1])) ++n;
  }
  return n;
}

// Deletes branches of at most max_len pixels that run from a free end into a junction.
void prune_spurs(Raster<std::uint8_t>& img, int max_len) {
  std::vector<Pixel> remove;
  std::vector<Pixel> path;
  for (int v = 0; v < img.height(); ++v) {
    for (int u = 0; u < img.width(); ++u) {
      if (!img.at(u, v) || neighbour_count(img, {u, v}) != 1) continue;
      path.assign(1, Pixel{u, v});
      Pixel prev{u, v};
      Pixel cur{u, v};
      for (const auto& d : kDirs) {
        if (img.contains(u + d[0], v + d[1]) && img.at(u + d[0], v + d[1])) cur = {u + d[0], v + d[1]};
      }
      while (static_cast<int>(path.size()) <= max_len) {
        const int n = neighbour_count(img, cur);
        if (n >= 3) {
          remove.insert(remove.end(), path.begin(), path.end());
          break;
        }
        if (n != 2) break;
        path.push_back(cur);
        Pixel next = cur;
        for (const auto& d : kDirs) {
          const Pixel q{cur.u + d[0], cur.v + d[1]};
          if (q != prev && img.contains(q.u, q.v) && img.at(q.u, q.v)) next = q;
        }
        prev = cur;
        cur = next;
      }
    }
  }
  for (const auto& q : remove) img.at(q.u, q.v) = 0;
}

EdgeMap relinked(const EdgeMap& like, const Raster<std::uint8_t>& img) {
  EdgeMap out;
  out.source = like.source;
  out.width = like.width;
  out.height = like.height;
  out.segments = link_edges(img);
  return out;
}

}  // namespace

EdgeMap thin_edge_map(const EdgeMap& edges) {
  Raster<std::uint8_t> img = rasterize(edges);
  zhang_suen(img);
  return relinked(edges, img);
}

EdgeMap clean_edge_map(const EdgeMap& edges, int spur_length) {
  Raster<std::uint8_t> img = rasterize(edges);
  zhang_suen(img);
  if (spur_length > 0) {
    prune_spurs(img, spur_length);
    // Removing a spur can leave its junction pixel as a corner that thins away.
    zhang_suen(img);
  }
  return relinked(edges, img);
}

namespace {

// Zero pixels of `support` in 8-connected zero regions of at least `min_area` pixels.
Raster<std::uint8_t> large_no_data(const RasterImage& support, std::size_t min_area) {
  const int w = support.width();
  const int h = support.height();
  Raster<std::uint8_t> label(w, h, 0);  // 0 unvisited, 1 small, 2 large
  std::vector<Pixel> region;
  std::vector<Pixel> stack;
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      if (support.at(u, v) != 0.0f || label.at(u, v)) continue;
      region.clear();
      stack.push_back({u, v});
      label.at(u, v) = 1;
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        region.push_back(p);
        for (const auto& d : kDirs) {
          const int uu = p.u + d[0];
          const int vv = p.v + d[1];
          if (!support.contains(uu, vv) || support.at(uu, vv) != 0.0f || label.at(uu, vv)) continue;
          label.at(uu, vv) = 1;
          stack.push_back({uu, vv});
        }
      }
      if (region.size() >= min_area) {
        for (const auto& p : region) label.at(p.u, p.v) = 2;
      }
    }
  }
  return label;
}

// Removes edge pixels within `margin` (Chebyshev) of a large no-data region of `support`.
EdgeMap mask_no_data(const EdgeMap& edges, const RasterImage& support, int margin) {
  if (margin <= 0) return edges;
  const int w = support.width();
  const int h = support.height();
  const auto no_data = large_no_data(support, static_cast<std::size_t>((2 * margin + 1) * (2 * margin + 1)));
  // Distance to the nearest no-data pixel along rows, then the max over a column window.
  Raster<std::uint8_t> near_row(w, h, 0);
  for (int v = 0; v < h; ++v) {
    int last = -1'000'000;
    for (int u = 0; u < w; ++u) {
      if (no_data.at(u, v) == 2) last = u;
      if (u - last <= margin) near_row.at(u, v) = 1;
    }
    last = 1'000'000;
    for (int u = w - 1; u >= 0; --u) {
      if (no_data.at(u, v) == 2) last = u;
      if (last - u <= margin) near_row.at(u, v) = 1;
    }
  }
  Raster<std::uint8_t> keep = rasterize(edges);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      if (!keep.at(u, v)) continue;
      for (int dv = -margin; dv <= margin; ++dv) {
        if (near_row.contains(u, v + dv) && near_row.at(u, v + dv)) {
          keep.at(u, v) = 0;
          break;
        }
      }
    }
  }
  EdgeMap out;
  out.source = edges.source;
  out.width = w;
  out.height = h;
  out.segments = link_edges(keep);
  return out;
}

}  // namespace

EdgeMap lidar_edge_pipeline(const RasterImage& depth, const RasterImage& reflectivity, const EdgePipelineConfig& cfg) {
  if (!depth.same_shape(reflectivity)) throw_input_error("depth and reflectivity rasters differ in size");
  auto fill = [&](const RasterImage& img) {
    return fill_ratio(img) < cfg.closing_fill_limit ? fill_holes_by_median(img, cfg.fill_passes) : img;
  };
  const RasterImage d = fill(depth);
  const RasterImage r = fill(reflectivity);
  const EdgeMap depth_edges = detect_with(equalize_histogram(d), cfg.lidar_thresholds, cfg.canny, EdgeSource::kLidar);
  const EdgeMap refl_edges = detect_with(equalize_histogram(r), cfg.lidar_thresholds, cfg.canny, EdgeSource::kLidar);
  EdgeMap merged = merge_edge_maps(depth_edges, refl_edges);
  if (cfg.clean) merged = clean_edge_map(merged, cfg.spur_length);
  merged = mask_no_data(merged, d, cfg.no_data_margin);
  return filter_edges(merged, scaled_filter(cfg.filter, depth.width(), depth.height()));
}

}  // namespace camvox
