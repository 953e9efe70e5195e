#include "sanitrack/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <queue>

namespace sanitrack {

namespace {

float coord(const Point3& p, int axis) {
  switch (axis) {
    case 0:
      return p.x;
    case 1:
      return p.y;
    default:
      return p.z;
  }
}

bool neighbor_less(const Neighbor& a, const Neighbor& b) {
  return a.sq_dist < b.sq_dist || (a.sq_dist == b.sq_dist && a.index < b.index);
}

}  // namespace

KdTree::KdTree(std::span<const Point3> points, std::size_t leaf_size)
    : points_(points.begin(), points.end()), leaf_size_(std::max<std::size_t>(1, leaf_size)) {
  order_.resize(points_.size());
  for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / leaf_size_ + 1);
    build(0, static_cast<std::uint32_t>(points_.size()));
  }
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.emplace_back();
  Node node;
  node.begin = begin;
  node.end = end;
  for (int a = 0; a < 3; ++a) {
    node.lo[a] = std::numeric_limits<float>::infinity();
    node.hi[a] = -std::numeric_limits<float>::infinity();
  }
  for (std::uint32_t i = begin; i < end; ++i) {
    const auto& p = points_[order_[i]];
    for (int a = 0; a < 3; ++a) {
      node.lo[a] = std::min(node.lo[a], coord(p, a));
      node.hi[a] = std::max(node.hi[a], coord(p, a));
    }
  }

  if (end - begin > leaf_size_) {
    int axis = 0;
    float spread = node.hi[0] - node.lo[0];
    for (int a = 1; a < 3; ++a) {
      if (node.hi[a] - node.lo[a] > spread) {
        spread = node.hi[a] - node.lo[a];
        axis = a;
      }
    }
    if (spread > 0.0f) {
      const std::uint32_t mid = begin + (end - begin) / 2;
      std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                       [&](std::uint32_t l, std::uint32_t r) {
                         return coord(points_[l], axis) < coord(points_[r], axis);
                       });
      node.split_axis = axis;
      node.split_value = coord(points_[order_[mid]], axis);
      node.left = build(begin, mid);
      node.right = build(mid, end);
    }
  }
  nodes_[id] = node;
  return id;
}

double KdTree::box_sq_dist(const Node& node, const Point3& q) const {
  double d = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double c = coord(q, a);
    if (c < node.lo[a]) {
      d += (node.lo[a] - c) * (node.lo[a] - c);
    } else if (c > node.hi[a]) {
      d += (c - node.hi[a]) * (c - node.hi[a]);
    }
  }
  return d;
}

Neighbor KdTree::nearest(const Point3& query) const {
  auto result = knn(query, 1);
  if (result.empty()) {
    throw ParameterError("nearest neighbor query on an empty tree");
  }
  return result.front();
}

std::vector<Neighbor> KdTree::knn(const Point3& query, std::size_t k, std::uint32_t exclude) const {
  std::vector<Neighbor> heap;  // max-heap on neighbor_less
  if (k == 0 || nodes_.empty()) return heap;
  heap.reserve(k + 1);

  const auto worst = [&]() {
    return heap.size() < k ? std::numeric_limits<double>::infinity() : heap.front().sq_dist;
  };

  std::vector<std::int32_t> stack{0};
  while (!stack.empty()) {
    const Node& node = nodes_[static_cast<std::size_t>(stack.back())];
    stack.pop_back();
    // Ties at the current worst distance must still be visited for the index tie-break.
    if (box_sq_dist(node, query) > worst()) continue;
    if (node.split_axis < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const std::uint32_t idx = order_[i];
        if (idx == exclude) continue;
        const Neighbor cand{idx, squared_distance(query, points_[idx])};
        if (heap.size() < k) {
          heap.push_back(cand);
          std::push_heap(heap.begin(), heap.end(), neighbor_less);
        } else if (neighbor_less(cand, heap.front())) {
          std::pop_heap(heap.begin(), heap.end(), neighbor_less);
          heap.back() = cand;
          std::push_heap(heap.begin(), heap.end(), neighbor_less);
        }
      }
      continue;
    }
    const bool go_left_first = coord(query, node.split_axis) < node.split_value;
    // Push the far child first so the near child is explored first.
    if (go_left_first) {
      stack.push_back(node.right);
      stack.push_back(node.left);
    } else {
      stack.push_back(node.left);
      stack.push_back(node.right);
    }
  }
  std::sort_heap(heap.begin(), heap.end(), neighbor_less);
  return heap;
}

void KdTree::radius_search(const Point3& query, double radius, std::vector<Neighbor>& out) const {
  out.clear();
  if (nodes_.empty() || radius < 0.0) return;
  const double r2 = radius * radius;
  std::int32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[static_cast<std::size_t>(stack[--top])];
    if (box_sq_dist(node, query) > r2) continue;
    if (node.split_axis < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const std::uint32_t idx = order_[i];
        const double d2 = squared_distance(query, points_[idx]);
        if (d2 <= r2) out.push_back({idx, d2});
      }
      continue;
    }
    stack[top++] = node.left;
    stack[top++] = node.right;
  }
}

}  // namespace sanitrack
