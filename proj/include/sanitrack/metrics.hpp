#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sanitrack/types.hpp"

namespace sanitrack {

struct CountSeries {
  std::vector<std::int64_t> predicted;
  std::vector<std::int64_t> truth;
};

struct CountErrors {
  double mae = 0.0;
  double rmse = 0.0;
  double nrmse = 0.0;  // rmse / object count
};

double normalized_rmse(double rmse, std::int64_t n_objects);

/// MAE, RMSE and RMSE normalized by the object count. Throws ParameterError on
/// empty or mismatched series, or n_objects < 1.
CountErrors count_errors(const CountSeries& series, std::int64_t n_objects);

/// Per frame, the track id matched to each ground-truth object (nullopt = unmatched).
using IdTimeline = std::vector<std::vector<std::optional<std::uint64_t>>>;  // [frame][object]

/// Number of times an object's matched id differs from its previously matched id.
/// Unmatched frames neither count nor reset the last id.
std::size_t id_switches(const IdTimeline& timeline);

inline constexpr double kIdMatchGatePx = 30.0;

struct PixelTrack {
  std::uint64_t id = 0;
  Pixel center;
};

/// Minimum-distance one-to-one matching of object positions to track centers,
/// rejecting pairs farther apart than the gate.
std::vector<std::optional<std::uint64_t>> match_objects_to_tracks(
    const std::vector<Pixel>& objects, const std::vector<PixelTrack>& tracks,
    double gate_px = kIdMatchGatePx);

struct ScenarioResult {
  std::int64_t n_objects = 0;
  CountSeries series;
};

struct BenchmarkRow {
  std::int64_t n_objects = 0;
  std::size_t samples = 0;
  CountErrors errors;
};

struct BenchmarkTable {
  std::vector<BenchmarkRow> rows;

  std::string to_json() const;
  /// Fixed-width text table with the columns Object(s), MAE, RMSE, NRMSE.
  std::string to_text() const;
};

/// Requires exactly one result for each object count 1..5.
BenchmarkTable benchmark_table(const std::vector<ScenarioResult>& results);

}  // namespace sanitrack
