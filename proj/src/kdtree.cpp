#include <algorithm>
#include <stdexcept>

#include "rfusion/scan_match.hpp"

namespace rfusion {

namespace {
constexpr std::uint32_t kLeafSize = 8;
}

KdTree::KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
  if (points_.empty()) throw std::invalid_argument("cannot index an empty scan");
  order_.resize(points_.size());
  for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
  nodes_.reserve(2 * points_.size() / kLeafSize + 1);
  build(0, static_cast<std::uint32_t>(order_.size()));
}

std::uint32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  if (end - begin <= kLeafSize) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }

  Vec3 lo = points_[order_[begin]];
  Vec3 hi = lo;
  for (std::uint32_t i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) { return points_[a][axis] < points_[b][axis]; });
  const double split = points_[order_[mid]][axis];

  const std::uint32_t left = build(begin, mid);
  const std::uint32_t right = build(mid, end);
  Node& node = nodes_[id];
  node.axis = axis;
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

void KdTree::search_nearest(std::uint32_t id, const Vec3& q, Neighbor& best) const {
  const Node& node = nodes_[id];
  if (node.axis < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const Neighbor cand{order_[i], squared_distance(q, points_[order_[i]])};
      if (closer(cand, best)) best = cand;
    }
    return;
  }
  const double diff = q[node.axis] - node.split;
  const std::uint32_t near = diff < 0.0 ? node.left : node.right;
  const std::uint32_t far = diff < 0.0 ? node.right : node.left;
  search_nearest(near, q, best);
  // Equal distances may still hide a lower index on the far side.
  if (diff * diff <= best.sq_dist) search_nearest(far, q, best);
}

Neighbor KdTree::nearest(const Vec3& query) const {
  Neighbor best;
  best.index = points_.size();
  search_nearest(0, query, best);
  return best;
}

void KdTree::search_k(std::uint32_t id, const Vec3& q, std::size_t k, std::vector<Neighbor>& heap) const {
  const Node& node = nodes_[id];
  if (node.axis < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const Neighbor cand{order_[i], squared_distance(q, points_[order_[i]])};
      if (heap.size() < k) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end(), closer);
      } else if (closer(cand, heap.front())) {
        std::pop_heap(heap.begin(), heap.end(), closer);
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end(), closer);
      }
    }
    return;
  }
  const double diff = q[node.axis] - node.split;
  const std::uint32_t near = diff < 0.0 ? node.left : node.right;
  const std::uint32_t far = diff < 0.0 ? node.right : node.left;
  search_k(near, q, k, heap);
  if (heap.size() < k || diff * diff <= heap.front().sq_dist) search_k(far, q, k, heap);
}

std::vector<Neighbor> KdTree::k_nearest(const Vec3& query, std::size_t k) const {
  std::vector<Neighbor> heap;
  if (k == 0) return heap;
  heap.reserve(k);
  search_k(0, query, k, heap);
  std::sort_heap(heap.begin(), heap.end(), closer);
  return heap;
}

}  // namespace rfusion
