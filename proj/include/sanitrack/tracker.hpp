#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sanitrack/cluster.hpp"
#include "sanitrack/types.hpp"

namespace sanitrack {

/// Axis-aligned image box in pixels.
struct DetectionBox {
  double u_min = 0.0;
  double v_min = 0.0;
  double u_max = 0.0;
  double v_max = 0.0;
  Point3 source_centroid;

  double width() const { return u_max - u_min; }
  double height() const { return v_max - v_min; }
  double area() const { return width() * height(); }
  double center_u() const { return 0.5 * (u_min + u_max); }
  double center_v() const { return 0.5 * (v_min + v_max); }
  bool valid() const { return u_min < u_max && v_min < v_max; }
};

/// Intersection over union in [0, 1]; 0 when either box is degenerate.
double iou(const DetectionBox& a, const DetectionBox& b);

enum class BoxMode {
  kClusterExtent,  // AABB of all projected member points, padded
  kCentroid,       // fixed box centered on the projected centroid
};

struct BoxOptions {
  BoxMode mode = BoxMode::kClusterExtent;
  double pad_px = 4.0;
  double centroid_box_width = 40.0;
  double centroid_box_height = 20.0;
};

struct DetectionSet {
  std::vector<DetectionBox> boxes;
  std::size_t skipped = 0;  // clusters with an unprojectable member
};

DetectionSet detections_from_clusters(const ClusterResult& result, std::span<const Point3> points,
                                      const CameraIntrinsics& intrinsics,
                                      const BoxOptions& options = {});

struct Assignment {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (row, col), ascending rows
  double total_cost = 0.0;
};

/// Minimum-cost one-to-one assignment of min(rows, cols) pairs. `cost` is row-major
/// rows x cols with finite entries.
Assignment hungarian(std::span<const double> cost, std::size_t rows, std::size_t cols);

using Vector7 = Eigen::Matrix<double, 7, 1>;
using Matrix7 = Eigen::Matrix<double, 7, 7>;
using Vector4 = Eigen::Matrix<double, 4, 1>;
using Matrix4 = Eigen::Matrix<double, 4, 4>;

/// Constant-velocity box model [u, v, s, r, du, dv, ds]: center, area, aspect ratio.
struct KalmanState {
  Vector7 x = Vector7::Zero();
  Matrix7 P = Matrix7::Identity();
};

struct KalmanNoise {
  Matrix4 R;   // measurement
  Matrix7 Q;   // process
  Matrix7 P0;  // initial covariance

  /// Constants of the reference SORT implementation.
  static KalmanNoise sort_defaults();
};

/// [u, v, s, r] of a box.
Vector4 box_to_measurement(const DetectionBox& box);
DetectionBox state_to_box(const Vector7& x);

KalmanState kalman_init(const DetectionBox& box, const KalmanNoise& noise);
KalmanState kalman_predict(const KalmanState& state, const KalmanNoise& noise);
KalmanState kalman_update(const KalmanState& state, const DetectionBox& box,
                          const KalmanNoise& noise);

/// Smallest eigenvalue of the symmetric part of P.
double min_eigenvalue(const Matrix7& P);

struct SortParams {
  double iou_min = 0.3;
  std::size_t max_age = 15;
  std::size_t min_hits = 3;
  KalmanNoise noise = KalmanNoise::sort_defaults();

  void validate() const;
};

struct Track {
  std::uint64_t id = 0;
  KalmanState kalman;
  std::size_t hits = 0;
  std::size_t hit_streak = 0;
  std::size_t age = 0;
  std::size_t time_since_update = 0;
  bool confirmed = false;
  Point3 last_centroid;
};

struct TrackOutput {
  std::uint64_t id = 0;
  DetectionBox box;
  Point3 centroid;  // 3-d centroid of the last matched detection
};

/// SORT: Kalman prediction, Hungarian association on 1 - IoU, and track lifecycle.
/// Tentative tracks are dropped on their first miss; confirmed tracks survive up to
/// max_age consecutive misses.
class SortTracker {
 public:
  explicit SortTracker(SortParams params = {});

  /// Advances one frame. Returns confirmed tracks matched in this frame.
  std::vector<TrackOutput> step(const std::vector<DetectionBox>& detections);

  const std::vector<Track>& tracks() const { return tracks_; }
  std::size_t frame_count() const { return frames_; }
  std::uint64_t next_id() const { return next_id_; }
  const SortParams& params() const { return params_; }

 private:
  SortParams params_;
  std::vector<Track> tracks_;
  std::uint64_t next_id_ = 1;
  std::size_t frames_ = 0;
};

}  // namespace sanitrack
