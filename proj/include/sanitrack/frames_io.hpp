#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "sanitrack/types.hpp"

namespace sanitrack {

inline constexpr std::uint32_t kSequenceFormatVersion = 1;

struct SequenceHeader {
  std::uint32_t version = kSequenceFormatVersion;
  std::uint32_t frame_count = 0;
  CameraIntrinsics intrinsics;
};

struct Sequence {
  SequenceHeader header;
  std::vector<PointCloudFrame> frames;
};

/// Size of the fixed header: magic, version, count, 4 x f32 intrinsics, 2 x u32 image size.
inline constexpr std::size_t kSequenceHeaderBytes = 4 + 4 + 4 + 4 * 4 + 2 * 4;

/// Writes the little-endian `TOFS` sequence format. The header's frame_count is
/// ignored and replaced by frames.size(). Returns the number of bytes written.
std::size_t write_sequence(const std::vector<PointCloudFrame>& frames, const SequenceHeader& header,
                           std::ostream& sink);

Sequence read_sequence(std::istream& source);

void save_sequence(const std::filesystem::path& path, const std::vector<PointCloudFrame>& frames,
                   const CameraIntrinsics& intrinsics);
Sequence load_sequence(const std::filesystem::path& path);

/// Pinhole projection u = fx*x/z + cx, v = fy*y/z + cy. Throws NotProjectableError for z <= 0.
Pixel project_point(const Point3& p, const CameraIntrinsics& k);

namespace detail {

// Little-endian primitive codecs shared with the background model format.
void put_u32(std::ostream& out, std::uint32_t v);
void put_f32(std::ostream& out, float v);
void put_f64(std::ostream& out, double v);
bool get_u32(std::istream& in, std::uint32_t& v);
bool get_f32(std::istream& in, float& v);
bool get_f64(std::istream& in, double& v);

}  // namespace detail

}  // namespace sanitrack
