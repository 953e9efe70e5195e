#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "sanitrack/types.hpp"

namespace sanitrack {

inline constexpr double kDefaultBandwidth = 0.015;
inline constexpr double kDefaultPercentile = 70.0;
/// Kernel support radius in bandwidths. exp(-12.5) is below 4e-6 of the peak.
inline constexpr double kKernelCutoff = 5.0;

/// Points annotated with their Gaussian KDE density (1/m^3).
struct DensityCloud {
  PointList points;
  std::vector<double> densities;
  double bandwidth = kDefaultBandwidth;

  std::size_t size() const { return points.size(); }
};

/// Peak value of the isotropic 3-d Gaussian kernel, (2*pi*h^2)^(-3/2).
double gaussian_kernel_peak(double bandwidth);

/// density(p_i) = 1/n * sum_j (2*pi*h^2)^(-3/2) * exp(-|p_i - p_j|^2 / (2*h^2)), including
/// j == i, with neighbors beyond kKernelCutoff * h ignored. Throws ParameterError for
/// an empty input or h <= 0.
DensityCloud kde(std::span<const Point3> points, double bandwidth);

/// The same estimator evaluated at arbitrary query locations.
std::vector<double> kde_at(std::span<const Point3> points, std::span<const Point3> queries,
                           double bandwidth);

/// Keeps points whose density is at least the nearest-rank p-th percentile,
/// i.e. the ceil(p*n/100)-th smallest density (the minimum when p = 0). Order preserved.
DensityCloud percentile_filter(const DensityCloud& cloud, double percent);

/// Nearest-rank percentile value used by percentile_filter.
double nearest_rank_percentile(std::span<const double> values, double percent);

/// Maximum-density image over the projected cloud, downsampled by cell_px.
struct Heatmap {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<double> values;  // row-major, 0 where nothing projects

  double at(std::uint32_t x, std::uint32_t y) const { return values[y * width + x]; }
  double max_value() const;

  /// 8-bit binary PGM (P5), normalized so the maximum maps to 255.
  void write_pgm(std::ostream& out) const;
  void write_pgm(const std::filesystem::path& path) const;
};

/// Points with z <= 0 throw NotProjectableError; points outside the image are skipped.
Heatmap heatmap(const DensityCloud& cloud, const CameraIntrinsics& intrinsics,
                std::uint32_t cell_px = 1);

}  // namespace sanitrack
