#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "camvox/edgemap.hpp"

namespace camvox {

struct Neighbor {
  std::uint32_t index = 0;    // position in the indexed pixel list
  std::int64_t dist2 = 0;     // squared Euclidean distance, pixels^2
  double distance() const;

  friend bool operator<(const Neighbor& a, const Neighbor& b) {
    return a.dist2 != b.dist2 ? a.dist2 < b.dist2 : a.index < b.index;
  }
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// 2D k-d tree over integer pixel coordinates. Queries are exact; equal distances are
/// ordered by ascending index.
class NearestNeighborIndex {
 public:
  explicit NearestNeighborIndex(std::vector<Pixel> pixels);

  std::size_t size() const { return pixels_.size(); }
  const std::vector<Pixel>& pixels() const { return pixels_; }

  /// Up to k neighbours, nearest first.
  std::vector<Neighbor> knn(Pixel query, std::size_t k) const;
  /// Same as knn but reuses the caller's buffer.
  void knn(Pixel query, std::size_t k, std::vector<Neighbor>& out) const;

 private:
  struct Node {
    std::uint32_t point = 0;  // index into pixels_
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint8_t axis = 0;
  };

  std::int32_t build(std::span<std::uint32_t> ids, int depth);
  void search(std::int32_t node, Pixel q, std::size_t k, std::vector<Neighbor>& heap) const;

  std::vector<Pixel> pixels_;
  std::vector<Node> nodes_;
  std::int32_t root_ = -1;
};

/// Index over every pixel of the edge map. Throws InsufficientStructure when it has none.
NearestNeighborIndex build_index(const EdgeMap& lidar_edges);

}  // namespace camvox
