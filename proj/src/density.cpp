#include "sanitrack/density.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <ostream>
#include <unordered_map>

#include "sanitrack/frames_io.hpp"
#include "sanitrack/kdtree.hpp"

namespace sanitrack {

namespace {

// exp(-a) for a in [0, max_arg]: tabulated at 1/64 steps, degree-4 Taylor in between.
class NegExp {
 public:
  static constexpr double kStep = 1.0 / 64.0;

  explicit NegExp(double max_arg) : table_(static_cast<std::size_t>(max_arg / kStep) + 2) {
    for (std::size_t m = 0; m < table_.size(); ++m) table_[m] = std::exp(-static_cast<double>(m) * kStep);
  }

  double operator()(double a) const {
    const int m = static_cast<int>(a * 64.0);
    const double r = a - static_cast<double>(m) * kStep;
    const double poly = 1.0 - r * (1.0 - r * (0.5 - r * (1.0 / 6.0 - r * (1.0 / 24.0))));
    return table_[static_cast<std::size_t>(m)] * poly;
  }

 private:
  std::vector<double> table_;
};

}  // namespace

double gaussian_kernel_peak(double bandwidth) {
  return std::pow(2.0 * std::numbers::pi * bandwidth * bandwidth, -1.5);
}

DensityCloud kde(std::span<const Point3> points, double bandwidth) {
  if (points.empty()) throw ParameterError("kde needs at least one point");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw ParameterError("kde bandwidth must be positive");
  }

  const std::size_t n = points.size();
  DensityCloud cloud;
  cloud.points.assign(points.begin(), points.end());
  cloud.bandwidth = bandwidth;

  // Unnormalized kernel sums over a uniform grid of cells a quarter of the cutoff; each
  // unordered pair within the cutoff is evaluated once.
  const double cutoff = kKernelCutoff * bandwidth;
  const double cutoff2 = cutoff * cutoff;
  const double inv_two_h2 = 1.0 / (2.0 * bandwidth * bandwidth);
  constexpr int kReach = 4;
  const double cell = cutoff / kReach;
  const NegExp neg_exp(cutoff2 * inv_two_h2);

  double lo[3] = {points[0].x, points[0].y, points[0].z};
  for (const auto& p : points) {
    lo[0] = std::min(lo[0], static_cast<double>(p.x));
    lo[1] = std::min(lo[1], static_cast<double>(p.y));
    lo[2] = std::min(lo[2], static_cast<double>(p.z));
  }
  const auto cell_key = [&](std::int64_t cx, std::int64_t cy, std::int64_t cz) {
    return (static_cast<std::uint64_t>(cx) << 42) | (static_cast<std::uint64_t>(cy) << 21) |
           static_cast<std::uint64_t>(cz);
  };
  struct Cell {
    std::int64_t cx, cy, cz;
    std::size_t begin, end;
  };
  std::vector<std::pair<std::uint64_t, std::uint32_t>> keyed(n);
  std::vector<std::array<std::int64_t, 3>> coords(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto& p = points[i];
    coords[i] = {static_cast<std::int64_t>((p.x - lo[0]) / cell),
                 static_cast<std::int64_t>((p.y - lo[1]) / cell),
                 static_cast<std::int64_t>((p.z - lo[2]) / cell)};
    keyed[i] = {cell_key(coords[i][0], coords[i][1], coords[i][2]), i};
  }
  std::sort(keyed.begin(), keyed.end());

  std::vector<double> xs(n), ys(n), zs(n), sorted_sums(n, 1.0);
  std::vector<Cell> cells;
  std::unordered_map<std::uint64_t, std::size_t> cell_index;
  for (std::size_t s = 0; s < n; ++s) {
    const auto i = keyed[s].second;
    xs[s] = points[i].x;
    ys[s] = points[i].y;
    zs[s] = points[i].z;
    if (cells.empty() || keyed[s].first != keyed[s - 1].first) {
      cell_index.emplace(keyed[s].first, cells.size());
      cells.push_back({coords[i][0], coords[i][1], coords[i][2], s, s});
    }
    cells.back().end = s + 1;
  }

  // Forward half of the cell neighborhood, minus cells wholly beyond the cutoff.
  std::vector<std::array<int, 3>> offsets;
  for (int dx = 0; dx <= kReach; ++dx) {
    for (int dy = -kReach; dy <= kReach; ++dy) {
      for (int dz = -kReach; dz <= kReach; ++dz) {
        if (dx == 0 && (dy < 0 || (dy == 0 && dz < 0))) continue;
        int gap2 = 0;
        for (const int d : {dx, dy, dz}) {
          const int g = std::max(std::abs(d) - 1, 0);
          gap2 += g * g;
        }
        if (gap2 > kReach * kReach) continue;
        offsets.push_back({dx, dy, dz});
      }
    }
  }

  for (const auto& a : cells) {
    for (const auto& [dx, dy, dz] : offsets) {
      const auto bx = a.cx + dx, by = a.cy + dy, bz = a.cz + dz;
      if (by < 0 || bz < 0) continue;
      const auto it = cell_index.find(cell_key(bx, by, bz));
      if (it == cell_index.end()) continue;
      const Cell& b = cells[it->second];
      const bool same = dx == 0 && dy == 0 && dz == 0;
      for (std::size_t i = a.begin; i < a.end; ++i) {
        const double xi = xs[i], yi = ys[i], zi = zs[i];
        double acc = 0.0;
        for (std::size_t j = same ? i + 1 : b.begin; j < b.end; ++j) {
          const double ex = xs[j] - xi, ey = ys[j] - yi, ez = zs[j] - zi;
          const double d2 = ex * ex + ey * ey + ez * ez;
          if (d2 > cutoff2) continue;
          const double k = neg_exp(d2 * inv_two_h2);
          acc += k;
          sorted_sums[j] += k;
        }
        sorted_sums[i] += acc;
      }
    }
  }
  std::vector<double> sums(n);
  for (std::size_t s = 0; s < n; ++s) sums[keyed[s].second] = sorted_sums[s];

  const double scale = gaussian_kernel_peak(bandwidth) / static_cast<double>(n);
  cloud.densities.resize(n);
  for (std::size_t i = 0; i < n; ++i) cloud.densities[i] = sums[i] * scale;
  return cloud;
}

std::vector<double> kde_at(std::span<const Point3> points, std::span<const Point3> queries,
                           double bandwidth) {
  if (points.empty()) throw ParameterError("kde needs at least one point");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw ParameterError("kde bandwidth must be positive");
  }
  const KdTree tree(points);
  const double inv_two_h2 = 1.0 / (2.0 * bandwidth * bandwidth);
  const double scale = gaussian_kernel_peak(bandwidth) / static_cast<double>(points.size());
  std::vector<double> out(queries.size(), 0.0);
  std::vector<Neighbor> hits;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    tree.radius_search(queries[q], kKernelCutoff * bandwidth, hits);
    double sum = 0.0;
    for (const auto& nb : hits) sum += std::exp(-nb.sq_dist * inv_two_h2);
    out[q] = sum * scale;
  }
  return out;
}

double nearest_rank_percentile(std::span<const double> values, double percent) {
  if (values.empty()) throw ParameterError("percentile of an empty set");
  if (!(percent >= 0.0 && percent <= 100.0)) {
    throw ParameterError("percentile must lie in [0, 100]");
  }
  const auto n = values.size();
  // The epsilon absorbs representation error in products like 70 * n / 100.
  auto rank = static_cast<std::size_t>(std::ceil(percent * static_cast<double>(n) / 100.0 - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::vector<double> sorted(values.begin(), values.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                   sorted.end());
  return sorted[rank - 1];
}

DensityCloud percentile_filter(const DensityCloud& cloud, double percent) {
  if (!(percent >= 0.0 && percent <= 100.0)) {
    throw ParameterError("percentile must lie in [0, 100]");
  }
  DensityCloud kept;
  kept.bandwidth = cloud.bandwidth;
  if (cloud.densities.empty()) return kept;
  const double threshold = nearest_rank_percentile(cloud.densities, percent);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (cloud.densities[i] >= threshold) {
      kept.points.push_back(cloud.points[i]);
      kept.densities.push_back(cloud.densities[i]);
    }
  }
  return kept;
}

double Heatmap::max_value() const {
  return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
}

void Heatmap::write_pgm(std::ostream& out) const {
  out << "P5\n" << width << ' ' << height << "\n255\n";
  const double peak = max_value();
  std::vector<unsigned char> row(width);
  for (std::uint32_t y = 0; y < height; ++y) {
    for (std::uint32_t x = 0; x < width; ++x) {
      const double v = peak > 0.0 ? at(x, y) / peak : 0.0;
      row[x] = static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
}

void Heatmap::write_pgm(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_pgm(out);
}

Heatmap heatmap(const DensityCloud& cloud, const CameraIntrinsics& intrinsics,
                std::uint32_t cell_px) {
  if (cell_px == 0) throw ParameterError("heatmap cell size must be at least one pixel");
  Heatmap map;
  map.width = (intrinsics.width + cell_px - 1) / cell_px;
  map.height = (intrinsics.height + cell_px - 1) / cell_px;
  map.values.assign(static_cast<std::size_t>(map.width) * map.height, 0.0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Pixel px = project_point(cloud.points[i], intrinsics);
    if (px.u < 0.0 || px.v < 0.0 || px.u >= intrinsics.width || px.v >= intrinsics.height) {
      continue;
    }
    const auto x = static_cast<std::uint32_t>(px.u) / cell_px;
    const auto y = static_cast<std::uint32_t>(px.v) / cell_px;
    double& cell = map.values[static_cast<std::size_t>(y) * map.width + x];
    cell = std::max(cell, cloud.densities[i]);
  }
  return map;
}

}  // namespace sanitrack
