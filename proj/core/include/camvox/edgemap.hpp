#pragma once

#include <optional>
#include <vector>

#include "camvox/raster.hpp"

namespace camvox {

struct Pixel {
  int u = 0;
  int v = 0;
  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

/// Chain of 8-connected edge pixels.
struct EdgeSegment {
  std::vector<Pixel> pixels;
  std::size_t length() const { return pixels.size(); }
};

enum class EdgeSource { kCamera, kLidar };

struct EdgeMap {
  std::vector<EdgeSegment> segments;
  EdgeSource source = EdgeSource::kCamera;
  int width = 0;
  int height = 0;

  std::size_t pixel_count() const;
  std::vector<Pixel> all_pixels() const;
  /// Sorted, deduplicated pixel set.
  std::vector<Pixel> pixel_set() const;
  /// Throws InputError if a segment breaks 8-connectivity, leaves the image or overlaps another.
  void validate() const;
};

/// Image diagonal of the reference camera (1520 x 568) that the pixel defaults are anchored to.
double reference_diagonal();
/// Scales a pixel quantity defined at the reference resolution to an image of the given size.
double scale_to_resolution(double reference_px, int width, int height);

/// Cumulative-distribution remap over nonzero pixels; zero stays zero.
RasterImage equalize_histogram(const RasterImage& img);

struct CannyConfig {
  double sigma = 1.4;
  int kernel_size = 5;
  // Hysteresis thresholds as fractions of the given percentile of nonzero gradient magnitudes.
  double low_ratio = 0.4;
  double high_ratio = 1.0;
  double percentile = 0.9;
};

struct CannyThresholds {
  double low = 0.0;
  double high = 0.0;
};

/// Gaussian-smoothed Sobel gradient magnitude (L2).
RasterImage gradient_magnitude(const RasterImage& img, const CannyConfig& cfg = {});

/// Thresholds derived from the gradient-magnitude percentile.
CannyThresholds adaptive_thresholds(const RasterImage& img, const CannyConfig& cfg = {});

/// Binary edge raster (1 = edge) from the Canny stages.
Raster<std::uint8_t> canny(const RasterImage& img, CannyThresholds thresholds, const CannyConfig& cfg = {});

/// Splits an edge raster into 8-connected chains. Deterministic (row-major seeding).
std::vector<EdgeSegment> link_edges(const Raster<std::uint8_t>& edges);

EdgeMap detect_edges(const RasterImage& img, double low, double high, const CannyConfig& cfg = {},
                     EdgeSource source = EdgeSource::kCamera);
/// Uses adaptive thresholds.
EdgeMap detect_edges(const RasterImage& img, const CannyConfig& cfg = {}, EdgeSource source = EdgeSource::kCamera);

/// Unit the filter rules judge: each linked segment on its own, or the contour it belongs to
/// (segments that touch or nearly touch are judged together).
enum class EdgeGrouping { kSegment, kContour };

struct EdgeFilterConfig {
  double min_length = 200.0;  // pixels, at the reference resolution unless already scaled
  double clutter_radius = 10.0;
  double clutter_count = 20.0;
  EdgeGrouping grouping = EdgeGrouping::kContour;
  int contour_gap = 4;  // segments this close (Chebyshev pixels) share a contour; 1 = touching
};

/// Drops groups shorter than min_length pixels, then drops groups whose pixels see, on average,
/// more than clutter_count pixels of other surviving groups within clutter_radius.
EdgeMap filter_edges(const EdgeMap& edges, double min_length, double clutter_radius, double clutter_count,
                     EdgeGrouping grouping = EdgeGrouping::kContour, int contour_gap = 4);
inline EdgeMap filter_edges(const EdgeMap& edges, const EdgeFilterConfig& cfg) {
  return filter_edges(edges, cfg.min_length, cfg.clutter_radius, cfg.clutter_count, cfg.grouping,
                      cfg.contour_gap);
}

/// Pixel-set union, re-linked into chains.
EdgeMap merge_edge_maps(const EdgeMap& depth_edges, const EdgeMap& refl_edges);

Raster<std::uint8_t> rasterize(const EdgeMap& edges);

/// Zhang-Suen thinning of the pixel set to one-pixel-wide curves, re-linked into chains.
EdgeMap thin_edge_map(const EdgeMap& edges);

/// Thinning followed by removal of side branches of at most spur_length pixels, so contours
/// link into long chains.
EdgeMap clean_edge_map(const EdgeMap& edges, int spur_length);

struct EdgePipelineConfig {
  CannyConfig canny;
  std::optional<CannyThresholds> camera_thresholds;  // adaptive when empty
  std::optional<CannyThresholds> lidar_thresholds;
  EdgeFilterConfig filter;
  double closing_fill_limit = 0.9;  // lidar rasters are hole-filled while fill ratio is below this
  int fill_passes = 3;
  bool clean = true;     // thin and prune spurs before filtering
  int spur_length = 8;
  int no_data_margin = 3;  // lidar edge pixels this close to no-data are dropped; 0 keeps all
};

/// Filter settings with the length threshold scaled to the image size.
EdgeFilterConfig scaled_filter(const EdgeFilterConfig& cfg, int width, int height);

/// Equalize, detect, clean and filter a camera grayscale image.
EdgeMap camera_edge_pipeline(const RasterImage& gray, const EdgePipelineConfig& cfg = {});

/// Hole-fill (when sparse), equalize, detect on depth and reflectivity, merge, clean, drop
/// edges along the no-data border and filter.
EdgeMap lidar_edge_pipeline(const RasterImage& depth, const RasterImage& reflectivity,
                            const EdgePipelineConfig& cfg = {});

}  // namespace camvox
