#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "sanitrack/accumulator.hpp"
#include "sanitrack/background.hpp"
#include "sanitrack/cluster.hpp"
#include "sanitrack/compliance.hpp"
#include "sanitrack/density.hpp"
#include "sanitrack/tracker.hpp"

namespace sanitrack {

struct IoPaths {
  std::string sequence;
  std::string model;
  std::string prescan;
  std::string ground_truth;
  std::string hand_events;
  std::string events;
  std::string report;
};

/// Every tunable of the pipeline. Serialized as one flat JSON object with
/// `module.key` names; unknown keys are rejected.
struct PipelineConfig {
  std::uint64_t seed = 0;
  double voxel_size = kDefaultVoxelSize;
  double fine_radius = kDefaultFineRadius;
  std::size_t window = kDefaultWindow;
  std::size_t subsample_target = kDefaultSubsampleTarget;
  double bandwidth = kDefaultBandwidth;
  double percentile = kDefaultPercentile;
  ClusterParams cluster;
  SortParams sort;
  BoxOptions boxes;
  ComplianceConfig compliance;
  IoPaths io;

  /// Throws ConfigError when a value is outside its module's bounds.
  void validate() const;

  std::string to_json(int indent = 2) const;
  static PipelineConfig from_json(const std::string& text);
  static PipelineConfig load(const std::filesystem::path& path);
};

}  // namespace sanitrack
