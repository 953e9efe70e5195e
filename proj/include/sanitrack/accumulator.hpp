#pragma once

#include <cstdint>
#include <deque>
#include <span>

#include "sanitrack/types.hpp"

namespace sanitrack {

inline constexpr std::size_t kDefaultWindow = 5;
inline constexpr std::size_t kDefaultSubsampleTarget = 4000;

/// FIFO window over the last k foreground point lists.
class Accumulator {
 public:
  explicit Accumulator(std::size_t k = kDefaultWindow);

  /// Appends a frame's foreground, evicting the oldest once more than k are held.
  /// Throws OrderingError unless timestamp exceeds the last pushed one.
  void push(PointList points, double timestamp);

  /// All buffered points, oldest frame first. Duplicates are kept.
  PointList current_cloud() const;

  /// Drops buffered frames but keeps the last timestamp for ordering checks.
  void clear() { buffer_.clear(); }

  std::size_t window() const { return k_; }
  std::size_t frames() const { return buffer_.size(); }
  std::size_t point_count() const;

 private:
  struct Entry {
    double timestamp;
    PointList points;
  };

  std::size_t k_;
  std::deque<Entry> buffer_;
  double last_timestamp_ = 0.0;
  bool has_last_ = false;
};

/// Uniform sample without replacement of min(target, n) points. Selection order
/// follows the input order; deterministic for a given seed.
PointList subsample(std::span<const Point3> points, std::size_t target, std::uint64_t seed);

}  // namespace sanitrack
