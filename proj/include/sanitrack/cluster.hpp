#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sanitrack/types.hpp"

namespace sanitrack {

struct ClusterParams {
  std::size_t min_cluster_size = 15;
  std::size_t min_samples = 5;  // core distance uses the k-th neighbor, self excluded

  void validate() const;
};

inline constexpr int kNoise = -1;

struct ClusterResult {
  std::vector<int> labels;  // kNoise or 0..m-1, numbered by smallest member index
  std::vector<Point3> centroids;
  std::vector<std::size_t> sizes;

  std::size_t cluster_count() const { return sizes.size(); }
  /// Point indices per cluster, ascending.
  std::vector<std::vector<std::uint32_t>> members() const;
};

/// Edge of the mutual-reachability minimum spanning tree, a < b.
struct MstEdge {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  double weight = 0.0;
};

/// Entry of the condensed cluster tree: `child` is a point index when size == 1 and
/// child_is_cluster is false, otherwise a cluster id. Cluster 0 is the root.
struct CondensedEntry {
  std::uint32_t parent = 0;
  std::uint32_t child = 0;
  double lambda = 0.0;
  std::size_t size = 1;
  bool child_is_cluster = false;
};

/// Distance to the k-th nearest other point. Throws ParameterError unless n > k >= 1.
std::vector<double> core_distances(std::span<const Point3> points, std::size_t k);

/// max(core_a, core_b, |a - b|).
double mutual_reachability(const Point3& a, const Point3& b, double core_a, double core_b);

/// Prim's algorithm on the dense mutual-reachability graph. Ties resolve toward
/// the smaller vertex index.
std::vector<MstEdge> mutual_reachability_mst(std::span<const Point3> points,
                                             std::span<const double> core);

/// Condensed tree built from MST edges sorted by (weight, a, b).
std::vector<CondensedEntry> condense_tree(std::vector<MstEdge> mst, std::size_t n_points,
                                          std::size_t min_cluster_size);

/// Excess-of-mass selection over a condensed tree. The root is a candidate, so an
/// unsplit hierarchy yields one cluster. Returns per-cluster selection flags.
std::vector<bool> select_clusters(const std::vector<CondensedEntry>& tree);

/// lambda = 1 / distance, capped for coincident points.
double lambda_of(double distance);

/// HDBSCAN with EOM extraction. n < min_cluster_size yields all noise.
ClusterResult hdbscan(std::span<const Point3> points, const ClusterParams& params);

/// Arithmetic mean of each cluster's members.
std::vector<Point3> centroids(std::span<const int> labels, std::span<const Point3> points);

}  // namespace sanitrack
