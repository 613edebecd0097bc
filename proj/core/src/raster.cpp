#include "camvox/raster.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace camvox {

double fill_ratio(const RasterImage& img) {
  if (img.empty()) return 0.0;
  const auto px = img.pixels();
  const auto filled = std::count_if(px.begin(), px.end(), [](float x) { return x != 0.0f; });
  return static_cast<double>(filled) / static_cast<double>(px.size());
}

namespace {

template <typename Op>
RasterImage filter3x3(const RasterImage& img, float init, Op op) {
  const int w = img.width();
  const int h = img.height();
  RasterImage out(w, h);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      float acc = init;
      for (int dv = -1; dv <= 1; ++dv) {
        const int vv = std::clamp(v + dv, 0, h - 1);
        for (int du = -1; du <= 1; ++du) {
          const int uu = std::clamp(u + du, 0, w - 1);
          acc = op(acc, img.at(uu, vv));
        }
      }
      out.at(u, v) = acc;
    }
  }
  return out;
}

}  // namespace

RasterImage fill_holes_by_closing(const RasterImage& img) {
  if (img.empty()) return img;
  const auto max_op = [](float a, float b) { return std::max(a, b); };
  const auto min_op = [](float a, float b) { return std::min(a, b); };
  const RasterImage dilated = filter3x3(img, -std::numeric_limits<float>::infinity(), max_op);
  const RasterImage closed = filter3x3(dilated, std::numeric_limits<float>::infinity(), min_op);
  RasterImage out = img;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] == 0.0f) out[i] = closed[i];
  }
  return out;
}

RasterImage fill_holes_by_median(const RasterImage& img, int max_passes, int min_neighbors) {
  RasterImage cur = img;
  std::array<float, 8> nb{};
  for (int pass = 0; pass < max_passes; ++pass) {
    RasterImage next = cur;
    bool changed = false;
    for (int v = 0; v < cur.height(); ++v) {
      for (int u = 0; u < cur.width(); ++u) {
        if (cur.at(u, v) != 0.0f) continue;
        int n = 0;
        for (int dv = -1; dv <= 1; ++dv) {
          for (int du = -1; du <= 1; ++du) {
            if ((du || dv) && cur.contains(u + du, v + dv)) {
              const float x = cur.at(u + du, v + dv);
              if (x != 0.0f) nb[static_cast<std::size_t>(n++)] = x;
            }
          }
        }
        if (n < min_neighbors) continue;
        std::nth_element(nb.begin(), nb.begin() + n / 2, nb.begin() + n);
        next.at(u, v) = nb[static_cast<std::size_t>(n / 2)];
        changed = true;
      }
    }
    cur = std::move(next);
    if (!changed) break;
  }
  return cur;
}

RgbImage to_rgb(const RasterImage& gray) {
  RgbImage out(gray.width(), gray.height());
  for (std::size_t i = 0; i < gray.size(); ++i) {
    const auto g = static_cast<std::uint8_t>(std::clamp(std::lround(gray[i]), 0L, 255L));
    out[i] = {g, g, g};
  }
  return out;
}

}  // namespace camvox
