#include "sanitrack/background.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "sanitrack/frames_io.hpp"

namespace sanitrack {

namespace {

constexpr std::array<char, 4> kModelMagic = {'T', 'O', 'F', 'B'};
constexpr std::uint32_t kModelVersion = 1;

void check_sizes(double voxel_size, double fine_radius) {
  if (!(voxel_size > 0.0) || !std::isfinite(voxel_size)) {
    throw ParameterError("voxel size must be positive");
  }
  if (!(fine_radius > 0.0) || !std::isfinite(fine_radius)) {
    throw ParameterError("fine radius must be positive");
  }
}

struct Accum {
  double x = 0, y = 0, z = 0;
  std::size_t n = 0;
  Point3 lo{1e30f, 1e30f, 1e30f};
  Point3 hi{-1e30f, -1e30f, -1e30f};

  void add(const Point3& p) {
    x += p.x;
    y += p.y;
    z += p.z;
    ++n;
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
  }

  // Mean clamped to the member bounding box, so it stays in the members' voxel.
  Point3 centroid() const {
    const auto n_d = static_cast<double>(n);
    return {std::clamp(static_cast<float>(x / n_d), lo.x, hi.x),
            std::clamp(static_cast<float>(y / n_d), lo.y, hi.y),
            std::clamp(static_cast<float>(z / n_d), lo.z, hi.z)};
  }
};

}  // namespace

VoxelKey voxel_of(const Point3& p, double voxel_size) {
  return {static_cast<std::int32_t>(std::floor(p.x / voxel_size)),
          static_cast<std::int32_t>(std::floor(p.y / voxel_size)),
          static_cast<std::int32_t>(std::floor(p.z / voxel_size))};
}

BackgroundModel::BackgroundModel(double voxel_size, double fine_radius, VoxelSet occupied,
                                 PointList points)
    : voxel_size_(voxel_size),
      fine_radius_(fine_radius),
      occupied_(std::move(occupied)),
      index_(points) {}

BackgroundModel BackgroundModel::build(std::span<const PointCloudFrame> prescan, double voxel_size,
                                       double fine_radius) {
  check_sizes(voxel_size, fine_radius);
  std::size_t total = 0;
  for (const auto& f : prescan) total += f.points.size();
  if (prescan.empty() || total == 0) {
    throw ModelError("background prescan is empty");
  }

  VoxelSet occupied;
  // Octant accumulators keyed by the sub-voxel at half the voxel size, in key order.
  std::map<VoxelKey, Accum> octants;
  const double half = voxel_size / 2.0;
  for (const auto& frame : prescan) {
    for (const auto& p : frame.points) {
      occupied.insert(voxel_of(p, voxel_size));
      octants[voxel_of(p, half)].add(p);
    }
  }

  PointList representatives;
  representatives.reserve(octants.size());
  for (const auto& [key, acc] : octants) representatives.push_back(acc.centroid());
  return BackgroundModel(voxel_size, fine_radius, std::move(occupied), std::move(representatives));
}

BackgroundModel BackgroundModel::from_points(PointList points, double voxel_size,
                                             double fine_radius) {
  check_sizes(voxel_size, fine_radius);
  if (points.empty()) throw ModelError("background model has no points");
  VoxelSet occupied;
  for (const auto& p : points) occupied.insert(voxel_of(p, voxel_size));
  return BackgroundModel(voxel_size, fine_radius, std::move(occupied), std::move(points));
}

void BackgroundModel::save(std::ostream& out) const {
  using namespace detail;
  out.write(kModelMagic.data(), kModelMagic.size());
  put_u32(out, kModelVersion);
  put_f32(out, static_cast<float>(voxel_size_));
  put_f32(out, static_cast<float>(fine_radius_));
  const auto& pts = points();
  put_u32(out, static_cast<std::uint32_t>(pts.size()));
  for (const auto& p : pts) {
    put_f32(out, p.x);
    put_f32(out, p.y);
    put_f32(out, p.z);
  }
  if (!out) throw Error("background model write failed");
}

BackgroundModel BackgroundModel::load(std::istream& in) {
  using namespace detail;
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != 4 || magic != kModelMagic) {
    throw FormatError("not a background model file (bad magic)");
  }
  std::uint32_t version = 0;
  float voxel = 0.0f;
  float radius = 0.0f;
  std::uint32_t count = 0;
  if (!get_u32(in, version)) throw CorruptionError("truncated model header");
  if (version != kModelVersion) {
    throw FormatError("unsupported model version " + std::to_string(version));
  }
  if (!get_f32(in, voxel) || !get_f32(in, radius) || !get_u32(in, count)) {
    throw CorruptionError("truncated model header");
  }
  PointList pts(count);
  for (auto& p : pts) {
    if (!get_f32(in, p.x) || !get_f32(in, p.y) || !get_f32(in, p.z)) {
      throw CorruptionError("truncated model points");
    }
  }
  return from_points(std::move(pts), voxel, radius);
}

void BackgroundModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  save(out);
}

BackgroundModel BackgroundModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return load(in);
}

PointList coarse_filter(std::span<const Point3> points, const BackgroundModel& model) {
  PointList out;
  out.reserve(points.size() / 4);
  for (const auto& p : points) {
    if (!model.occupies(p)) out.push_back(p);
  }
  return out;
}

PointList fine_filter(std::span<const Point3> points, const BackgroundModel& model) {
  PointList out;
  out.reserve(points.size());
  const double r2 = model.fine_radius() * model.fine_radius();
  for (const auto& p : points) {
    if (model.index().nearest(p).sq_dist > r2) out.push_back(p);
  }
  return out;
}

PointList subtract(const PointCloudFrame& frame, const BackgroundModel& model) {
  return fine_filter(coarse_filter(frame.points, model), model);
}

}  // namespace sanitrack
