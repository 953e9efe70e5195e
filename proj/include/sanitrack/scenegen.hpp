#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sanitrack/types.hpp"

namespace sanitrack {

/// Open-top box seen from above. The camera sits at the origin looking down +z;
/// the bath floor is the plane z = floor_z and the walls rise to z = rim_z.
struct BathGeometry {
  float half_x = 0.30f;
  float half_y = 0.20f;
  float rim_z = 0.70f;
  float floor_z = 1.00f;
};

/// Knife handle: cylinder with a hemispherical cap at the tip. Sampling weight per
/// unit area falls linearly from 1 at the tip to base_weight at the far end.
struct KnifeModel {
  float radius = 0.01f;
  float length = 0.12f;
  float lean = 0.5235988f;  // tilt of the handle axis from vertical, radians
  float base_weight = 0.25f;
};

struct SceneConfig {
  BathGeometry bath;
  KnifeModel knife;
  CameraIntrinsics intrinsics;
  std::size_t background_samples = 10000;  // approximate; realized on a regular grid
  std::size_t knife_points = 200;          // per knife per frame before dropout
  std::size_t hand_points = 400;
  float hand_radius = 0.08f;
  double frame_rate = 30.0;
};

struct KnifePose {
  Point3 tip;        // center of the tip cap
  double yaw = 0.0;  // direction of lean in the image plane, radians
};

struct HandInterval {
  double start = 0.0;
  double end = 0.0;
};

struct ScenarioSpec {
  std::vector<KnifePose> knives;
  std::size_t frame_count = 30;
  double noise_sigma = 0.002;  // per-axis, meters; truncated at 3 sigma
  double dropout = 0.0;
  std::uint64_t seed = 0;
  std::vector<HandInterval> hand_intervals;
};

struct GroundTruth {
  std::vector<std::size_t> counts;  // per frame
  std::vector<KnifePose> knives;    // identity = position in this list
  std::vector<HandInterval> hand_intervals;
};

struct GeneratedSequence {
  std::vector<PointCloudFrame> frames;
  GroundTruth truth;
};

struct BenchmarkInstance {
  ScenarioSpec spec;
  GroundTruth truth;
};

struct BenchmarkOptions {
  int min_knives = 1;
  int max_knives = 5;
  std::size_t instances_per_count = 50;
  std::uint64_t seed = 0;
  double min_tip_separation = 0.04;
  ScenarioSpec template_spec;  // knives, seed and hands are overwritten per instance
  std::size_t max_attempts = 20000;
};

inline constexpr std::size_t kMaxKnives = 8;

/// Throws ParameterError when a pose leaves the bath, dropout is outside [0,1),
/// intervals overlap or there are too many knives.
void validate_spec(const ScenarioSpec& spec, const SceneConfig& config = {});

/// The fixed, noise-free background surface samples (floor + four walls).
PointList background_surface(const SceneConfig& config = {});

/// Empty-bath prescan frames. Requires spec.knives to be empty.
std::vector<PointCloudFrame> generate_background(const ScenarioSpec& spec,
                                                 const SceneConfig& config = {});

/// Knife scenario frames plus exact ground truth. With no knives and no hands the
/// frames are byte-identical to generate_background for the same spec.
GeneratedSequence generate_sequence(const ScenarioSpec& spec, const SceneConfig& config = {});

GroundTruth ground_truth_for(const ScenarioSpec& spec);

/// Random poses for every knife count in [min_knives, max_knives], instances_per_count
/// each. Throws PlacementError when the separation cannot be met.
std::vector<BenchmarkInstance> generate_benchmark(const BenchmarkOptions& options,
                                                  const SceneConfig& config = {});

/// Places `count` knives at random with the given minimum tip separation and
/// non-intersecting handles. Throws PlacementError after max_attempts failures.
std::vector<KnifePose> place_knives(std::size_t count, double min_tip_separation,
                                    std::uint64_t seed, const SceneConfig& config = {},
                                    std::size_t max_attempts = 20000);

/// Unit vector along the handle axis, from tip toward the base.
Point3 knife_axis(const KnifePose& pose, const KnifeModel& knife);

/// Distance from p to the handle surface (cylinder plus tip cap). Negative inside.
double distance_to_knife(const Point3& p, const KnifePose& pose, const KnifeModel& knife);

std::string ground_truth_to_json(const GroundTruth& truth);
GroundTruth ground_truth_from_json(const std::string& text);

}  // namespace sanitrack
