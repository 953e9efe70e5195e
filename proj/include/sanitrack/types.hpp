#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sanitrack {

/// Point in the camera frame: x right, y down, z forward (range). Meters.
struct Point3 {
  float x = 0.0f;
  float y = 0.0f;
  float z = 0.0f;

  friend bool operator==(const Point3&, const Point3&) = default;
};

using PointList = std::vector<Point3>;

/// One timestamped set of points, the unit of ingestion.
struct PointCloudFrame {
  double timestamp = 0.0;  // seconds
  PointList points;
};

struct CameraIntrinsics {
  float fx = 500.0f;
  float fy = 500.0f;
  float cx = 320.0f;
  float cy = 240.0f;
  std::uint32_t width = 640;
  std::uint32_t height = 480;

  friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;

  /// Throws ParameterError when the focal lengths or principal point are out of range.
  void validate() const;
};

/// Real-valued pixel coordinate.
struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

inline double squared_distance(const Point3& a, const Point3& b) {
  const double dx = static_cast<double>(a.x) - b.x;
  const double dy = static_cast<double>(a.y) - b.y;
  const double dz = static_cast<double>(a.z) - b.z;
  return dx * dx + dy * dy + dz * dz;
}

double distance(const Point3& a, const Point3& b);

// Error hierarchy. Every failure surfaced by the library derives from Error.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad magic, unsupported version, malformed text formats.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Structurally valid header but truncated or inconsistent payload.
class CorruptionError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Timestamps or events supplied out of order.
class OrderingError : public Error {
 public:
  using Error::Error;
};

class NotProjectableError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class PlacementError : public Error {
 public:
  using Error::Error;
};

class ModelError : public Error {
 public:
  using Error::Error;
};

}  // namespace sanitrack
