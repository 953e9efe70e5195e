#include "sanitrack/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sanitrack/frames_io.hpp"

namespace sanitrack {

namespace {

// Cost for pairs below the IoU gate; stripped after assignment.
constexpr double kInfeasibleCost = 1e6;
constexpr double kPsdTolerance = 1e-9;

Eigen::Matrix<double, 4, 7> measurement_matrix() {
  Eigen::Matrix<double, 4, 7> H = Eigen::Matrix<double, 4, 7>::Zero();
  H.block<4, 4>(0, 0).setIdentity();
  return H;
}

Matrix7 transition_matrix() {
  Matrix7 F = Matrix7::Identity();
  F(0, 4) = 1.0;
  F(1, 5) = 1.0;
  F(2, 6) = 1.0;
  return F;
}

Matrix7 checked_symmetric(const Matrix7& P) {
  Matrix7 sym = 0.5 * (P + P.transpose());
  const double lo = min_eigenvalue(sym);
  const double scale = std::max(1.0, sym.cwiseAbs().maxCoeff());
  if (lo < -kPsdTolerance * scale) {
    throw Error("Kalman covariance lost positive semi-definiteness (min eigenvalue " +
                std::to_string(lo) + ")");
  }
  return sym;
}

bool finite_state(const Vector7& x) { return x.allFinite(); }

}  // namespace

double iou(const DetectionBox& a, const DetectionBox& b) {
  if (!a.valid() || !b.valid()) return 0.0;
  const double iw = std::min(a.u_max, b.u_max) - std::max(a.u_min, b.u_min);
  const double ih = std::min(a.v_max, b.v_max) - std::max(a.v_min, b.v_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

DetectionSet detections_from_clusters(const ClusterResult& result, std::span<const Point3> points,
                                      const CameraIntrinsics& intrinsics,
                                      const BoxOptions& options) {
  DetectionSet out;
  const auto members = result.members();
  for (std::size_t c = 0; c < members.size(); ++c) {
    const Point3 centroid =
        c < result.centroids.size() ? result.centroids[c] : centroids(result.labels, points)[c];
    try {
      DetectionBox box;
      box.source_centroid = centroid;
      if (options.mode == BoxMode::kCentroid) {
        const Pixel px = project_point(centroid, intrinsics);
        box.u_min = px.u - options.centroid_box_width / 2.0;
        box.u_max = px.u + options.centroid_box_width / 2.0;
        box.v_min = px.v - options.centroid_box_height / 2.0;
        box.v_max = px.v + options.centroid_box_height / 2.0;
      } else {
        box.u_min = box.v_min = std::numeric_limits<double>::infinity();
        box.u_max = box.v_max = -std::numeric_limits<double>::infinity();
        for (const auto idx : members[c]) {
          const Pixel px = project_point(points[idx], intrinsics);
          box.u_min = std::min(box.u_min, px.u);
          box.u_max = std::max(box.u_max, px.u);
          box.v_min = std::min(box.v_min, px.v);
          box.v_max = std::max(box.v_max, px.v);
        }
        box.u_min -= options.pad_px;
        box.v_min -= options.pad_px;
        box.u_max += options.pad_px;
        box.v_max += options.pad_px;
      }
      if (!box.valid()) {
        ++out.skipped;
        continue;
      }
      out.boxes.push_back(box);
    } catch (const NotProjectableError&) {
      ++out.skipped;
    }
  }
  return out;
}

Assignment hungarian(std::span<const double> cost, std::size_t rows, std::size_t cols) {
  if (cost.size() != rows * cols) throw ParameterError("cost matrix size mismatch");
  Assignment result;
  if (rows == 0 || cols == 0) return result;

  // Shortest augmenting path with potentials; requires n <= m, so transpose if needed.
  const bool transposed = rows > cols;
  const std::size_t n = transposed ? cols : rows;
  const std::size_t m = transposed ? rows : cols;
  const auto a = [&](std::size_t i, std::size_t j) {
    return transposed ? cost[j * cols + i] : cost[i * cols + j];
  };

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] == 0) continue;
    const std::size_t r = p[j] - 1;
    const std::size_t c = j - 1;
    result.pairs.emplace_back(transposed ? c : r, transposed ? r : c);
  }
  std::sort(result.pairs.begin(), result.pairs.end());
  for (const auto& [r, c] : result.pairs) result.total_cost += cost[r * cols + c];
  return result;
}

KalmanNoise KalmanNoise::sort_defaults() {
  KalmanNoise noise;
  noise.R = Vector4(1.0, 1.0, 10.0, 10.0).asDiagonal();
  Vector7 q;
  q << 1.0, 1.0, 1.0, 1.0, 0.01, 0.01, 1e-4;
  noise.Q = q.asDiagonal();
  Vector7 p0;
  p0 << 10.0, 10.0, 10.0, 10.0, 1e4, 1e4, 1e4;
  noise.P0 = p0.asDiagonal();
  return noise;
}

Vector4 box_to_measurement(const DetectionBox& box) {
  const double w = box.width();
  const double h = box.height();
  return {box.center_u(), box.center_v(), w * h, w / h};
}

DetectionBox state_to_box(const Vector7& x) {
  const double s = std::max(x(2), 0.0);
  const double r = std::max(x(3), 0.0);
  const double w = std::sqrt(s * r);
  const double h = w > 0.0 ? s / w : 0.0;
  DetectionBox box;
  box.u_min = x(0) - w / 2.0;
  box.u_max = x(0) + w / 2.0;
  box.v_min = x(1) - h / 2.0;
  box.v_max = x(1) + h / 2.0;
  return box;
}

double min_eigenvalue(const Matrix7& P) {
  const Matrix7 sym = 0.5 * (P + P.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix7> solver(sym, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

KalmanState kalman_init(const DetectionBox& box, const KalmanNoise& noise) {
  KalmanState state;
  state.x.setZero();
  state.x.head<4>() = box_to_measurement(box);
  state.P = noise.P0;
  return state;
}

KalmanState kalman_predict(const KalmanState& state, const KalmanNoise& noise) {
  static const Matrix7 F = transition_matrix();
  KalmanState out = state;
  // Keep the predicted area non-negative.
  if (out.x(6) + out.x(2) <= 0.0) out.x(6) = 0.0;
  out.x = F * out.x;
  out.P = checked_symmetric(F * out.P * F.transpose() + noise.Q);
  return out;
}

KalmanState kalman_update(const KalmanState& state, const DetectionBox& box,
                          const KalmanNoise& noise) {
  static const Eigen::Matrix<double, 4, 7> H = measurement_matrix();
  const Vector4 z = box_to_measurement(box);
  const Vector4 y = z - H * state.x;
  const Matrix4 S = H * state.P * H.transpose() + noise.R;
  const Eigen::Matrix<double, 7, 4> K = state.P * H.transpose() * S.inverse();
  const Matrix7 I_KH = Matrix7::Identity() - K * H;

  KalmanState out;
  out.x = state.x + K * y;
  // Joseph-form covariance update, symmetrized.
  out.P = checked_symmetric(I_KH * state.P * I_KH.transpose() + K * noise.R * K.transpose());
  return out;
}

void SortParams::validate() const {
  if (!(iou_min >= 0.0 && iou_min <= 1.0)) throw ParameterError("iou_min must lie in [0, 1]");
  if (min_hits < 1) throw ParameterError("min_hits must be at least 1");
}

SortTracker::SortTracker(SortParams params) : params_(std::move(params)) { params_.validate(); }

std::vector<TrackOutput> SortTracker::step(const std::vector<DetectionBox>& detections) {
  ++frames_;

  for (auto& t : tracks_) {
    t.kalman = kalman_predict(t.kalman, params_.noise);
    ++t.age;
    ++t.time_since_update;
  }
  std::erase_if(tracks_, [](const Track& t) { return !finite_state(t.kalman.x); });

  const std::size_t nt = tracks_.size();
  const std::size_t nd = detections.size();
  std::vector<double> cost(nt * nd, kInfeasibleCost);
  for (std::size_t i = 0; i < nt; ++i) {
    const DetectionBox predicted = state_to_box(tracks_[i].kalman.x);
    for (std::size_t j = 0; j < nd; ++j) {
      const double overlap = iou(predicted, detections[j]);
      if (overlap >= params_.iou_min && overlap > 0.0) cost[i * nd + j] = 1.0 - overlap;
    }
  }
  const Assignment assignment = hungarian(cost, nt, nd);

  std::vector<char> track_matched(nt, 0);
  std::vector<char> det_matched(nd, 0);
  for (const auto& [ti, di] : assignment.pairs) {
    if (cost[ti * nd + di] >= kInfeasibleCost) continue;
    track_matched[ti] = 1;
    det_matched[di] = 1;
    Track& t = tracks_[ti];
    t.kalman = kalman_update(t.kalman, detections[di], params_.noise);
    t.time_since_update = 0;
    ++t.hits;
    ++t.hit_streak;
    t.last_centroid = detections[di].source_centroid;
    if (t.hit_streak >= params_.min_hits) t.confirmed = true;
  }

  for (std::size_t i = 0; i < nt; ++i) {
    if (!track_matched[i]) tracks_[i].hit_streak = 0;
  }
  // Tentative tracks do not survive a miss; confirmed ones coast up to max_age.
  std::erase_if(tracks_, [&](const Track& t) {
    return t.time_since_update > 0 && (!t.confirmed || t.time_since_update > params_.max_age);
  });

  for (std::size_t j = 0; j < nd; ++j) {
    if (det_matched[j] || !detections[j].valid()) continue;
    Track t;
    t.id = next_id_++;
    t.kalman = kalman_init(detections[j], params_.noise);
    t.hits = 1;
    t.hit_streak = 1;
    t.last_centroid = detections[j].source_centroid;
    t.confirmed = params_.min_hits <= 1;
    tracks_.push_back(std::move(t));
  }

  std::vector<TrackOutput> out;
  for (const auto& t : tracks_) {
    if (t.confirmed && t.time_since_update == 0) {
      out.push_back({t.id, state_to_box(t.kalman.x), t.last_centroid});
    }
  }
  return out;
}

}  // namespace sanitrack
