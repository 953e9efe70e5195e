#include "sanitrack/frames_io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace sanitrack {

namespace {

constexpr std::array<char, 4> kMagic = {'T', 'O', 'F', 'S'};

template <typename UInt>
void put_le(std::ostream& out, UInt v) {
  std::array<char, sizeof(UInt)> bytes{};
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename UInt>
bool get_le(std::istream& in, UInt& v) {
  std::array<unsigned char, sizeof(UInt)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    return false;
  }
  v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    v |= static_cast<UInt>(bytes[i]) << (8 * i);
  }
  return true;
}

}  // namespace

namespace detail {

void put_u32(std::ostream& out, std::uint32_t v) { put_le(out, v); }
void put_f32(std::ostream& out, float v) { put_le(out, std::bit_cast<std::uint32_t>(v)); }
void put_f64(std::ostream& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

bool get_u32(std::istream& in, std::uint32_t& v) { return get_le(in, v); }

bool get_f32(std::istream& in, float& v) {
  std::uint32_t bits = 0;
  if (!get_le(in, bits)) return false;
  v = std::bit_cast<float>(bits);
  return true;
}

bool get_f64(std::istream& in, double& v) {
  std::uint64_t bits = 0;
  if (!get_le(in, bits)) return false;
  v = std::bit_cast<double>(bits);
  return true;
}

}  // namespace detail

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0f) || !(fy > 0.0f)) {
    throw ParameterError("camera focal lengths must be positive");
  }
  if (!(cx >= 0.0f && cx < static_cast<float>(width)) ||
      !(cy >= 0.0f && cy < static_cast<float>(height))) {
    throw ParameterError("camera principal point must lie inside the image");
  }
}

double distance(const Point3& a, const Point3& b) { return std::sqrt(squared_distance(a, b)); }

std::size_t write_sequence(const std::vector<PointCloudFrame>& frames, const SequenceHeader& header,
                           std::ostream& sink) {
  if (header.version != kSequenceFormatVersion) {
    throw FormatError("unsupported sequence version " + std::to_string(header.version));
  }
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (!(frames[i].timestamp > frames[i - 1].timestamp)) {
      throw OrderingError("frame " + std::to_string(i) + " timestamp does not increase");
    }
  }

  using namespace detail;
  sink.write(kMagic.data(), kMagic.size());
  put_u32(sink, header.version);
  put_u32(sink, static_cast<std::uint32_t>(frames.size()));
  const auto& k = header.intrinsics;
  put_f32(sink, k.fx);
  put_f32(sink, k.fy);
  put_f32(sink, k.cx);
  put_f32(sink, k.cy);
  put_u32(sink, k.width);
  put_u32(sink, k.height);

  std::size_t bytes = kSequenceHeaderBytes;
  for (const auto& frame : frames) {
    put_f64(sink, frame.timestamp);
    put_u32(sink, static_cast<std::uint32_t>(frame.points.size()));
    for (const auto& p : frame.points) {
      put_f32(sink, p.x);
      put_f32(sink, p.y);
      put_f32(sink, p.z);
    }
    bytes += 8 + 4 + 12 * frame.points.size();
  }
  if (!sink) {
    throw Error("sequence write failed");
  }
  return bytes;
}

Sequence read_sequence(std::istream& source) {
  using namespace detail;
  std::array<char, 4> magic{};
  source.read(magic.data(), magic.size());
  if (source.gcount() != 4 || magic != kMagic) {
    throw FormatError("not a TOFS sequence (bad magic)");
  }

  Sequence seq;
  auto& h = seq.header;
  auto& k = h.intrinsics;
  if (!get_u32(source, h.version)) throw CorruptionError("truncated sequence header");
  if (h.version != kSequenceFormatVersion) {
    throw FormatError("unsupported sequence version " + std::to_string(h.version));
  }
  const bool header_ok = get_u32(source, h.frame_count) && get_f32(source, k.fx) &&
                         get_f32(source, k.fy) && get_f32(source, k.cx) && get_f32(source, k.cy) &&
                         get_u32(source, k.width) && get_u32(source, k.height);
  if (!header_ok) throw CorruptionError("truncated sequence header");

  seq.frames.reserve(h.frame_count);
  for (std::uint32_t f = 0; f < h.frame_count; ++f) {
    PointCloudFrame frame;
    std::uint32_t count = 0;
    if (!get_f64(source, frame.timestamp) || !get_u32(source, count)) {
      throw CorruptionError("sequence truncated at frame " + std::to_string(f) + " of " +
                            std::to_string(h.frame_count));
    }
    if (!seq.frames.empty() && !(frame.timestamp > seq.frames.back().timestamp)) {
      throw CorruptionError("frame " + std::to_string(f) + " timestamp does not increase");
    }
    frame.points.resize(count);
    for (auto& p : frame.points) {
      if (!get_f32(source, p.x) || !get_f32(source, p.y) || !get_f32(source, p.z)) {
        throw CorruptionError("point payload truncated in frame " + std::to_string(f));
      }
    }
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

void save_sequence(const std::filesystem::path& path, const std::vector<PointCloudFrame>& frames,
                   const CameraIntrinsics& intrinsics) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  SequenceHeader header;
  header.intrinsics = intrinsics;
  write_sequence(frames, header, out);
}

Sequence load_sequence(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_sequence(in);
}

Pixel project_point(const Point3& p, const CameraIntrinsics& k) {
  if (!(p.z > 0.0f)) {
    throw NotProjectableError("point behind or on the camera plane (z <= 0)");
  }
  const double z = p.z;
  return {static_cast<double>(k.fx) * p.x / z + k.cx, static_cast<double>(k.fy) * p.y / z + k.cy};
}

}  // namespace sanitrack
