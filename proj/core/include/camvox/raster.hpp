#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "camvox/error.hpp"

namespace camvox {

/// Row-major 2D raster. Pixel (u, v) is column u, row v.
template <typename T>
class Raster {
 public:
  using value_type = T;

  Raster() = default;
  Raster(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(static_cast<std::size_t>(checked_area(width, height)), fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool contains(int u, int v) const { return u >= 0 && v >= 0 && u < width_ && v < height_; }

  T& at(int u, int v) { return data_[index(u, v)]; }
  const T& at(int u, int v) const { return data_[index(u, v)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> pixels() { return data_; }
  std::span<const T> pixels() const { return data_; }

  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(u);
  }

  bool same_shape(const Raster& o) const { return width_ == o.width_ && height_ == o.height_; }
  template <typename U>
  bool same_shape(const Raster<U>& o) const {
    return width_ == o.width() && height_ == o.height();
  }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  static long checked_area(int w, int h) {
    if (w < 0 || h < 0) throw_input_error("raster dimensions must be non-negative");
    return static_cast<long>(w) * static_cast<long>(h);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Single-channel image: grayscale, depth (meters), reflectivity, equalized levels.
using RasterImage = Raster<float>;
using Rgb = std::array<std::uint8_t, 3>;
using RgbImage = Raster<Rgb>;

/// Fraction of pixels holding a nonzero value.
double fill_ratio(const RasterImage& img);

/// 3x3 grayscale closing (max then min); only zero (no-data) pixels take the closed value.
RasterImage fill_holes_by_closing(const RasterImage& img);

/// Repeatedly sets each zero pixel with at least `min_neighbors` nonzero 8-neighbours to the
/// median of those neighbours. Stops after `max_passes` or when a pass changes nothing.
RasterImage fill_holes_by_median(const RasterImage& img, int max_passes, int min_neighbors = 3);

RgbImage to_rgb(const RasterImage& gray);

}  // namespace camvox
