#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <unordered_set>
#include <vector>

#include "sanitrack/kdtree.hpp"
#include "sanitrack/types.hpp"

namespace sanitrack {

using VoxelKey = std::array<std::int32_t, 3>;

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const noexcept {
    // Large odd multipliers; good enough spread for grid coordinates.
    std::uint64_t h = static_cast<std::uint32_t>(k[0]) * 0x9E3779B97F4A7C15ull;
    h ^= static_cast<std::uint32_t>(k[1]) * 0xC2B2AE3D27D4EB4Full + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint32_t>(k[2]) * 0x165667B19E3779F9ull + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

using VoxelSet = std::unordered_set<VoxelKey, VoxelKeyHash>;

/// floor(p / voxel_size) per axis.
VoxelKey voxel_of(const Point3& p, double voxel_size);

inline constexpr double kDefaultVoxelSize = 0.02;
inline constexpr double kDefaultFineRadius = 0.01;

/// Prescanned static environment. Immutable after construction.
class BackgroundModel {
 public:
  /// Union of prescan voxels plus a KD-tree over at most 8 representatives per
  /// voxel (the centroid of each occupied octant). Throws ModelError on an empty
  /// prescan and ParameterError on non-positive sizes.
  static BackgroundModel build(std::span<const PointCloudFrame> prescan, double voxel_size,
                               double fine_radius);

  /// Rebuilds the occupied set from representative points, as stored on disk.
  static BackgroundModel from_points(PointList points, double voxel_size, double fine_radius);

  double voxel_size() const { return voxel_size_; }
  double fine_radius() const { return fine_radius_; }
  const VoxelSet& occupied() const { return occupied_; }
  const PointList& points() const { return index_.points(); }
  const KdTree& index() const { return index_; }

  bool occupies(const Point3& p) const { return occupied_.contains(voxel_of(p, voxel_size_)); }

  void save(std::ostream& out) const;
  static BackgroundModel load(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static BackgroundModel load(const std::filesystem::path& path);

 private:
  BackgroundModel(double voxel_size, double fine_radius, VoxelSet occupied, PointList points);

  double voxel_size_ = kDefaultVoxelSize;
  double fine_radius_ = kDefaultFineRadius;
  VoxelSet occupied_;
  KdTree index_;
};

/// Points whose voxel is not occupied by the background. Order preserved.
PointList coarse_filter(std::span<const Point3> points, const BackgroundModel& model);

/// Points farther than the fine radius from every background point. A point at
/// exactly the radius counts as background. Order preserved.
PointList fine_filter(std::span<const Point3> points, const BackgroundModel& model);

/// fine_filter(coarse_filter(frame)).
PointList subtract(const PointCloudFrame& frame, const BackgroundModel& model);

}  // namespace sanitrack
