#include "sanitrack/accumulator.hpp"

#include <algorithm>
#include <iterator>
#include <random>
#include <string>

namespace sanitrack {

Accumulator::Accumulator(std::size_t k) : k_(k) {
  if (k_ == 0) throw ParameterError("accumulator window k must be at least 1");
}

void Accumulator::push(PointList points, double timestamp) {
  if (has_last_ && !(timestamp > last_timestamp_)) {
    throw OrderingError("accumulator push at t=" + std::to_string(timestamp) +
                        " does not follow t=" + std::to_string(last_timestamp_));
  }
  last_timestamp_ = timestamp;
  has_last_ = true;
  buffer_.push_back({timestamp, std::move(points)});
  while (buffer_.size() > k_) buffer_.pop_front();
}

std::size_t Accumulator::point_count() const {
  std::size_t n = 0;
  for (const auto& e : buffer_) n += e.points.size();
  return n;
}

PointList Accumulator::current_cloud() const {
  PointList cloud;
  cloud.reserve(point_count());
  for (const auto& e : buffer_) cloud.insert(cloud.end(), e.points.begin(), e.points.end());
  return cloud;
}

PointList subsample(std::span<const Point3> points, std::size_t target, std::uint64_t seed) {
  if (target >= points.size()) return {points.begin(), points.end()};
  PointList out;
  out.reserve(target);
  std::mt19937_64 rng(seed);
  std::sample(points.begin(), points.end(), std::back_inserter(out), target, rng);
  return out;
}

}  // namespace sanitrack
