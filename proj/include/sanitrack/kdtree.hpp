#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sanitrack/types.hpp"

namespace sanitrack {

struct Neighbor {
  std::uint32_t index = 0;
  double sq_dist = 0.0;
};

/// Static 3-d tree over a point set. Holds a copy of the points; queries are
/// const and safe to run concurrently.
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(std::span<const Point3> points, std::size_t leaf_size = 8);

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const PointList& points() const { return points_; }

  /// Nearest stored point. Precondition: tree not empty.
  Neighbor nearest(const Point3& query) const;

  /// The k nearest stored points sorted by (distance, index). `exclude` skips one
  /// stored index (used for self-exclusion); pass npos to keep all.
  std::vector<Neighbor> knn(const Point3& query, std::size_t k,
                            std::uint32_t exclude = npos) const;

  /// All stored points with distance <= radius, in unspecified order. `out` is cleared first.
  void radius_search(const Point3& query, double radius, std::vector<Neighbor>& out) const;

  static constexpr std::uint32_t npos = 0xFFFFFFFFu;

 private:
  struct Node {
    // Leaf when split_axis < 0: indices [begin, end).
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::int32_t split_axis = -1;
    float split_value = 0.0f;
    float lo[3] = {0, 0, 0};
    float hi[3] = {0, 0, 0};
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  double box_sq_dist(const Node& node, const Point3& q) const;

  PointList points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_ = 8;
};

}  // namespace sanitrack
