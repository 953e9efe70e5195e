#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sanitrack/accumulator.hpp"
#include "sanitrack/background.hpp"
#include "sanitrack/compliance.hpp"
#include "sanitrack/config.hpp"
#include "sanitrack/density.hpp"
#include "sanitrack/frames_io.hpp"
#include "sanitrack/metrics.hpp"
#include "sanitrack/scenegen.hpp"
#include "sanitrack/tracker.hpp"

namespace sanitrack {

struct ClusterSummary {
  std::size_t size = 0;
  Point3 centroid;
};

struct TrackRecord {
  std::uint64_t id = 0;
  DetectionBox box;
  ComplianceStatus status = ComplianceStatus::kSanitizing;
  double dwell = 0.0;
};

/// Wall time per stage for one frame, milliseconds.
struct StageTimings {
  double subtract = 0.0;
  double accumulate = 0.0;
  double subsample = 0.0;
  double kde = 0.0;
  double percentile = 0.0;
  double cluster = 0.0;
  double boxes = 0.0;
  double track = 0.0;
  double compliance = 0.0;
  double total = 0.0;

  double stage_sum() const {
    return subtract + accumulate + subsample + kde + percentile + cluster + boxes + track +
           compliance;
  }
};

struct FrameOutput {
  std::size_t frame = 0;
  double timestamp = 0.0;
  bool gated = false;
  std::size_t foreground_points = 0;
  std::size_t accumulated_points = 0;
  std::size_t skipped_detections = 0;
  std::vector<ClusterSummary> clusters;
  std::vector<TrackRecord> tracks;
  std::vector<StatusChange> changes;
  std::optional<std::string> error;
  StageTimings timings;
};

/// Per-frame stage composition: background subtraction, FIFO accumulation,
/// subsampling, KDE, percentile filtering, HDBSCAN, box projection, SORT and
/// compliance. Owns all mutable state; frames must arrive in timestamp order.
class Pipeline {
 public:
  Pipeline(PipelineConfig config, BackgroundModel model, CameraIntrinsics intrinsics);

  /// Gates or releases counting. Events must not precede the last processed frame.
  void hand_event(const HandEvent& event);

  /// Processes the next frame. Stage failures are reported in FrameOutput::error;
  /// every frame yields an output.
  FrameOutput process(const PointCloudFrame& frame);

  /// The filtered density cloud of the most recent ungated frame.
  const DensityCloud& last_density() const { return last_density_; }
  const DensityCloud& last_filtered() const { return last_filtered_; }

  const ComplianceEngine& compliance() const { return compliance_; }
  const SortTracker& tracker() const { return tracker_; }
  const PipelineConfig& config() const { return config_; }
  const CameraIntrinsics& intrinsics() const { return intrinsics_; }

 private:
  std::vector<TrackRecord> frozen_tracks() const;

  PipelineConfig config_;
  BackgroundModel model_;
  CameraIntrinsics intrinsics_;
  Accumulator accumulator_;
  SortTracker tracker_;
  ComplianceEngine compliance_;
  std::vector<TrackRecord> last_tracks_;
  DensityCloud last_density_;
  DensityCloud last_filtered_;
  std::size_t frame_index_ = 0;
};

/// Deterministic per-frame subsampling seed.
std::uint64_t frame_seed(std::uint64_t seed, std::size_t frame);

/// Hand events from ground-truth intervals: presence at start, release at end.
std::vector<HandEvent> hand_events_from_intervals(const std::vector<HandInterval>& intervals);

/// Side-channel detector output: one 0/1 value per line, one line per frame.
/// Emits an event at each change of state, stamped with that frame's time.
std::vector<HandEvent> hand_events_from_flags(std::istream& in,
                                              const std::vector<PointCloudFrame>& frames);

// ND-JSON serialization of the event log.
std::string frame_record_json(const FrameOutput& out);
std::string status_change_json(const StatusChange& change);
std::string hand_event_json(const HandEvent& event);
std::string run_start_json(const CameraIntrinsics& intrinsics, std::size_t frames);
std::string error_event_json(std::size_t frame, const std::string& message);
std::string compliance_report_json(const std::vector<ComplianceRecord>& records,
                                   const ComplianceConfig& config);

struct RunSummary {
  std::size_t frames = 0;
  std::size_t errors = 0;
  std::vector<std::size_t> track_counts;  // per frame
  std::vector<bool> gated;
  std::vector<StageTimings> timings;
  std::vector<ComplianceRecord> report;
};

/// Drives a pipeline over in-memory frames, writing the ND-JSON log to `events`
/// when non-null. Hand events are interleaved by timestamp ahead of each frame.
RunSummary run_frames(Pipeline& pipeline, const std::vector<PointCloudFrame>& frames,
                      std::vector<HandEvent> hand_events, std::ostream* events);

/// Loads inputs named by config.io (sequence, model or prescan, optional hand
/// events) and runs. Throws ConfigError when required inputs are missing.
RunSummary run_pipeline(const PipelineConfig& config, std::ostream* events);

/// Builds the background model named by config.io (model file or prescan sequence).
BackgroundModel load_background(const PipelineConfig& config);

struct LatencyStats {
  double median = 0.0;
  double p95 = 0.0;
  double max = 0.0;
};

struct BenchReport {
  std::size_t frames = 0;
  std::size_t max_accumulated_points = 0;
  LatencyStats end_to_end;
  std::vector<std::pair<std::string, LatencyStats>> stages;  // pipeline order

  std::string to_json() const;
};

/// Nearest-rank statistics; values need not be sorted.
LatencyStats latency_stats(std::vector<double> values);

/// Per-stage and end-to-end latency over ungated frames.
BenchReport bench_report(const std::vector<StageTimings>& timings, const std::vector<bool>& gated,
                         std::size_t max_accumulated_points = 0);

/// Predicted (confirmed-track) and true counts per ungated frame from an ND-JSON log.
CountSeries counts_from_log(std::istream& log, const GroundTruth& truth);

struct BenchmarkRun {
  std::vector<ScenarioResult> results;  // one per knife count
  std::vector<CountSeries> per_instance;
  double seconds = 0.0;
};

/// Synthetic count benchmark: one shared background model from an empty-bath
/// prescan, then every instance run through a fresh pipeline. The prediction for
/// an instance is its confirmed-track count at the final frame.
BenchmarkRun run_benchmark(const BenchmarkOptions& options, const PipelineConfig& config,
                           const SceneConfig& scene = {});

}  // namespace sanitrack
