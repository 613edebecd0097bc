#include "camvox/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace camvox {

double Neighbor::distance() const { return std::sqrt(static_cast<double>(dist2)); }

NearestNeighborIndex::NearestNeighborIndex(std::vector<Pixel> pixels) : pixels_(std::move(pixels)) {
  std::vector<std::uint32_t> ids(pixels_.size());
  std::iota(ids.begin(), ids.end(), 0u);
  nodes_.reserve(pixels_.size());
  root_ = build(ids, 0);
}

std::int32_t NearestNeighborIndex::build(std::span<std::uint32_t> ids, int depth) {
  if (ids.empty()) return -1;
  const auto axis = static_cast<std::uint8_t>(depth % 2);
  const auto key = [&](std::uint32_t i) { return axis == 0 ? pixels_[i].u : pixels_[i].v; };
  const std::size_t mid = ids.size() / 2;
  std::nth_element(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(mid), ids.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return key(a) != key(b) ? key(a) < key(b) : a < b; });
  const auto self = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{ids[mid], -1, -1, axis});
  const std::int32_t left = build(ids.first(mid), depth + 1);
  const std::int32_t right = build(ids.subspan(mid + 1), depth + 1);
  nodes_[static_cast<std::size_t>(self)].left = left;
  nodes_[static_cast<std::size_t>(self)].right = right;
  return self;
}

void NearestNeighborIndex::search(std::int32_t node, Pixel q, std::size_t k, std::vector<Neighbor>& heap) const {
  if (node < 0) return;
  const Node& n = nodes_[static_cast<std::size_t>(node)];
  const Pixel& p = pixels_[n.point];
  const std::int64_t du = p.u - q.u;
  const std::int64_t dv = p.v - q.v;
  const Neighbor cand{n.point, du * du + dv * dv};
  if (heap.size() < k) {
    heap.push_back(cand);
    std::push_heap(heap.begin(), heap.end());
  } else if (cand < heap.front()) {
    std::pop_heap(heap.begin(), heap.end());
    heap.back() = cand;
    std::push_heap(heap.begin(), heap.end());
  }

  const std::int64_t diff = n.axis == 0 ? q.u - p.u : q.v - p.v;
  const std::int32_t near = diff < 0 ? n.left : n.right;
  const std::int32_t far = diff < 0 ? n.right : n.left;
  search(near, q, k, heap);
  // Equal keys may sit on either side of the split, so ties keep the far side alive.
  if (heap.size() < k || diff * diff <= heap.front().dist2) search(far, q, k, heap);
}

void NearestNeighborIndex::knn(Pixel query, std::size_t k, std::vector<Neighbor>& out) const {
  out.clear();
  if (k == 0 || root_ < 0) return;
  k = std::min(k, pixels_.size());
  search(root_, query, k, out);
  std::sort_heap(out.begin(), out.end());
}

std::vector<Neighbor> NearestNeighborIndex::knn(Pixel query, std::size_t k) const {
  std::vector<Neighbor> out;
  out.reserve(k);
  knn(query, k, out);
  return out;
}

NearestNeighborIndex build_index(const EdgeMap& lidar_edges) {
  auto pixels = lidar_edges.all_pixels();
  if (pixels.empty()) throw Error(ErrorKind::kInsufficientStructure, "insufficient scene structure: no lidar edge pixels");
  return NearestNeighborIndex(std::move(pixels));
}

}  // namespace camvox
