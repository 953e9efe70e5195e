#include "sanitrack/scenegen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "json.hpp"

namespace sanitrack {

namespace {

using Rng = std::mt19937_64;

// Independent stream per (seed, frame, purpose).
enum class Stream : std::uint32_t { kBackground = 1, kKnives = 2, kHand = 3, kPlacement = 4 };

Rng make_rng(std::uint64_t seed, std::uint64_t index, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

struct Vec3 {
  double x, y, z;
};

Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
Vec3 normalized(Vec3 a) { return (1.0 / std::sqrt(dot(a, a))) * a; }
Vec3 to_vec(const Point3& p) { return {p.x, p.y, p.z}; }

// Per-axis Gaussian noise truncated at 3 sigma.
class Noise {
 public:
  explicit Noise(double sigma) : sigma_(sigma) {}

  double operator()(Rng& rng) {
    if (sigma_ <= 0.0) return 0.0;
    for (;;) {
      const double n = normal_(rng);
      if (std::abs(n) <= 3.0) return n * sigma_;
    }
  }

  Point3 perturb(Rng& rng, Vec3 p) {
    const double dx = (*this)(rng);
    const double dy = (*this)(rng);
    const double dz = (*this)(rng);
    return {static_cast<float>(p.x + dx), static_cast<float>(p.y + dy),
            static_cast<float>(p.z + dz)};
  }

 private:
  double sigma_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

void append_background(const PointList& surface, const ScenarioSpec& spec, Rng& rng,
                       PointList& out) {
  Noise noise(spec.noise_sigma);
  std::bernoulli_distribution drop(spec.dropout);
  for (const auto& s : surface) {
    if (spec.dropout > 0.0 && drop(rng)) continue;
    out.push_back(noise.perturb(rng, to_vec(s)));
  }
}

void append_knife(const KnifePose& pose, const KnifeModel& knife, std::size_t samples,
                  const ScenarioSpec& spec, Rng& rng, PointList& out) {
  const Vec3 tip = to_vec(pose.tip);
  const Vec3 axis = to_vec(knife_axis(pose, knife));
  const Vec3 ref = std::abs(axis.z) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
  const Vec3 e1 = normalized(cross(axis, ref));
  const Vec3 e2 = cross(axis, e1);

  const double r = knife.radius;
  const double len = knife.length;
  const double b = knife.base_weight;
  // Weighted area: cap 2*pi*r^2 at weight 1, lateral 2*pi*r*len*(1+b)/2.
  const double cap_probability = r / (r + len * (1.0 + b) / 2.0);
  const double slope = (1.0 - b) / len;  // weight(t) = 1 - slope * t
  const double total = len * (1.0 + b) / 2.0;

  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution drop(spec.dropout);
  Noise noise(spec.noise_sigma);

  for (std::size_t i = 0; i < samples; ++i) {
    Vec3 surface{};
    if (uniform(rng) < cap_probability) {
      Vec3 dir{normal(rng), normal(rng), normal(rng)};
      dir = normalized(dir);
      if (dot(dir, axis) > 0.0) dir = -1.0 * dir;
      surface = tip + r * dir;
    } else {
      // Inverse CDF of the linear weight along the axis.
      const double u = uniform(rng) * total;
      const double t = slope > 0.0 ? (1.0 - std::sqrt(std::max(0.0, 1.0 - 2.0 * slope * u))) / slope
                                   : u;
      const double theta = 2.0 * std::numbers::pi * uniform(rng);
      surface = tip + t * axis + r * (std::cos(theta) * e1 + std::sin(theta) * e2);
    }
    const Point3 p = noise.perturb(rng, surface);
    if (spec.dropout > 0.0 && drop(rng)) continue;
    out.push_back(p);
  }
}

void append_hand(const ScenarioSpec& spec, const SceneConfig& config, std::size_t interval,
                 Rng& rng, PointList& out) {
  // Blob center is fixed per interval.
  Rng placement = make_rng(spec.seed, interval, Stream::kPlacement);
  const auto& bath = config.bath;
  const double r = config.hand_radius;
  std::uniform_real_distribution<double> ux(-bath.half_x + r, bath.half_x - r);
  std::uniform_real_distribution<double> uy(-bath.half_y + r, bath.half_y - r);
  const Vec3 center{ux(placement), uy(placement), bath.rim_z + r};

  std::normal_distribution<double> normal(0.0, 1.0);
  Noise noise(spec.noise_sigma);
  for (std::size_t i = 0; i < config.hand_points; ++i) {
    Vec3 dir = normalized({normal(rng), normal(rng), normal(rng)});
    out.push_back(noise.perturb(rng, center + r * dir));
  }
}

bool inside(double v, double lo, double hi) { return v >= lo && v <= hi; }

double segment_distance(Vec3 p0, Vec3 p1, Vec3 q0, Vec3 q1) {
  // Closest distance between two segments (Ericson, Real-Time Collision Detection 5.1.9).
  const Vec3 d1 = p1 - p0;
  const Vec3 d2 = q1 - q0;
  const Vec3 r = p0 - q0;
  const double a = dot(d1, d1);
  const double e = dot(d2, d2);
  const double f = dot(d2, r);
  double s = 0.0;
  double t = 0.0;
  const double c = dot(d1, r);
  const double b = dot(d1, d2);
  const double denom = a * e - b * b;
  if (denom > 1e-12) s = std::clamp((b * f - c * e) / denom, 0.0, 1.0);
  t = (b * s + f) / e;
  if (t < 0.0) {
    t = 0.0;
    s = std::clamp(-c / a, 0.0, 1.0);
  } else if (t > 1.0) {
    t = 1.0;
    s = std::clamp((b - c) / a, 0.0, 1.0);
  }
  const Vec3 diff = (p0 + s * d1) - (q0 + t * d2);
  return std::sqrt(dot(diff, diff));
}

}  // namespace

Point3 knife_axis(const KnifePose& pose, const KnifeModel& knife) {
  const double s = std::sin(knife.lean);
  return {static_cast<float>(s * std::cos(pose.yaw)), static_cast<float>(s * std::sin(pose.yaw)),
          static_cast<float>(std::cos(knife.lean))};
}

double distance_to_knife(const Point3& p, const KnifePose& pose, const KnifeModel& knife) {
  const Vec3 tip = to_vec(pose.tip);
  const Vec3 axis = to_vec(knife_axis(pose, knife));
  const double t = std::clamp(dot(to_vec(p) - tip, axis), 0.0, static_cast<double>(knife.length));
  const Vec3 diff = to_vec(p) - (tip + t * axis);
  return std::sqrt(dot(diff, diff)) - knife.radius;
}

void validate_spec(const ScenarioSpec& spec, const SceneConfig& config) {
  if (spec.knives.size() > kMaxKnives) {
    throw ParameterError("at most " + std::to_string(kMaxKnives) + " knives are supported");
  }
  if (!(spec.dropout >= 0.0 && spec.dropout < 1.0)) {
    throw ParameterError("dropout must lie in [0, 1)");
  }
  if (!(spec.noise_sigma >= 0.0)) throw ParameterError("noise sigma must be non-negative");
  const auto& bath = config.bath;
  const double r = config.knife.radius;
  for (std::size_t i = 0; i < spec.knives.size(); ++i) {
    const auto& pose = spec.knives[i];
    const Vec3 tip = to_vec(pose.tip);
    const Vec3 base = tip + static_cast<double>(config.knife.length) *
                                to_vec(knife_axis(pose, config.knife));
    for (const Vec3& end : {tip, base}) {
      if (!inside(end.x, -bath.half_x + r, bath.half_x - r) ||
          !inside(end.y, -bath.half_y + r, bath.half_y - r) ||
          !inside(end.z, bath.rim_z + r, bath.floor_z - r)) {
        throw ParameterError("knife " + std::to_string(i) + " handle leaves the bath region");
      }
    }
  }
  auto intervals = spec.hand_intervals;
  std::sort(intervals.begin(), intervals.end(),
            [](const HandInterval& a, const HandInterval& b) { return a.start < b.start; });
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    if (!(intervals[i].end > intervals[i].start)) {
      throw ParameterError("hand interval must have end > start");
    }
    if (i > 0 && intervals[i].start < intervals[i - 1].end) {
      throw ParameterError("hand intervals overlap");
    }
  }
}

PointList background_surface(const SceneConfig& config) {
  const auto& bath = config.bath;
  const double wx = 2.0 * bath.half_x;
  const double wy = 2.0 * bath.half_y;
  const double depth = bath.floor_z - bath.rim_z;
  const double area = wx * wy + 2.0 * wx * depth + 2.0 * wy * depth;
  const double spacing = std::sqrt(area / static_cast<double>(std::max<std::size_t>(1, config.background_samples)));

  const auto cells = [&](double extent) {
    return std::max<long>(1, std::lround(extent / spacing));
  };
  const long nx = cells(wx);
  const long ny = cells(wy);
  const long nz = cells(depth);

  PointList surface;
  surface.reserve(static_cast<std::size_t>(nx * ny + 2 * (nx + ny) * nz));
  const auto at = [](double lo, double extent, long i, long n) {
    return lo + extent * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
  };
  for (long i = 0; i < nx; ++i) {
    for (long j = 0; j < ny; ++j) {
      surface.push_back({static_cast<float>(at(-bath.half_x, wx, i, nx)),
                         static_cast<float>(at(-bath.half_y, wy, j, ny)), bath.floor_z});
    }
  }
  for (long k = 0; k < nz; ++k) {
    const auto z = static_cast<float>(at(bath.rim_z, depth, k, nz));
    for (long i = 0; i < nx; ++i) {
      const auto x = static_cast<float>(at(-bath.half_x, wx, i, nx));
      surface.push_back({x, -bath.half_y, z});
      surface.push_back({x, bath.half_y, z});
    }
    for (long j = 0; j < ny; ++j) {
      const auto y = static_cast<float>(at(-bath.half_y, wy, j, ny));
      surface.push_back({-bath.half_x, y, z});
      surface.push_back({bath.half_x, y, z});
    }
  }
  return surface;
}

std::vector<PointCloudFrame> generate_background(const ScenarioSpec& spec,
                                                 const SceneConfig& config) {
  if (!spec.knives.empty()) {
    throw ParameterError("background prescan must not contain knives");
  }
  ScenarioSpec empty = spec;
  empty.hand_intervals.clear();
  return generate_sequence(empty, config).frames;
}

GroundTruth ground_truth_for(const ScenarioSpec& spec) {
  GroundTruth truth;
  truth.counts.assign(spec.frame_count, spec.knives.size());
  truth.knives = spec.knives;
  truth.hand_intervals = spec.hand_intervals;
  return truth;
}

GeneratedSequence generate_sequence(const ScenarioSpec& spec, const SceneConfig& config) {
  validate_spec(spec, config);
  const PointList surface = background_surface(config);

  GeneratedSequence out;
  out.truth = ground_truth_for(spec);
  out.frames.reserve(spec.frame_count);
  for (std::size_t f = 0; f < spec.frame_count; ++f) {
    PointCloudFrame frame;
    frame.timestamp = static_cast<double>(f) / config.frame_rate;
    frame.points.reserve(surface.size() + spec.knives.size() * config.knife_points);

    Rng bg_rng = make_rng(spec.seed, f, Stream::kBackground);
    append_background(surface, spec, bg_rng, frame.points);

    Rng knife_rng = make_rng(spec.seed, f, Stream::kKnives);
    for (const auto& pose : spec.knives) {
      append_knife(pose, config.knife, config.knife_points, spec, knife_rng, frame.points);
    }

    for (std::size_t h = 0; h < spec.hand_intervals.size(); ++h) {
      const auto& iv = spec.hand_intervals[h];
      if (frame.timestamp >= iv.start && frame.timestamp < iv.end) {
        Rng hand_rng = make_rng(spec.seed, f, Stream::kHand);
        append_hand(spec, config, h, hand_rng, frame.points);
      }
    }
    out.frames.push_back(std::move(frame));
  }
  return out;
}

std::vector<KnifePose> place_knives(std::size_t count, double min_tip_separation,
                                    std::uint64_t seed, const SceneConfig& config,
                                    std::size_t max_attempts) {
  const auto& bath = config.bath;
  const auto& knife = config.knife;
  const double r = knife.radius;
  const double drop = knife.length * std::cos(knife.lean);

  Rng rng = make_rng(seed, count, Stream::kPlacement);
  std::uniform_real_distribution<double> ux(-bath.half_x + r, bath.half_x - r);
  std::uniform_real_distribution<double> uy(-bath.half_y + r, bath.half_y - r);
  // Tips sit in the upper part of the bath with the whole handle above the floor.
  const double z_lo = bath.rim_z + r + 0.04;
  const double z_hi = std::max(z_lo, std::min<double>(bath.rim_z + 0.12, bath.floor_z - r - drop));
  std::uniform_real_distribution<double> uz(z_lo, z_hi);
  std::uniform_real_distribution<double> uyaw(0.0, 2.0 * std::numbers::pi);

  std::vector<KnifePose> poses;
  std::size_t attempts = 0;
  while (poses.size() < count) {
    if (++attempts > max_attempts) {
      throw PlacementError("cannot place " + std::to_string(count) + " knives with " +
                           std::to_string(min_tip_separation) + " m tip separation");
    }
    KnifePose cand;
    cand.tip = {static_cast<float>(ux(rng)), static_cast<float>(uy(rng)),
                static_cast<float>(uz(rng))};
    cand.yaw = uyaw(rng);

    ScenarioSpec probe;
    probe.knives = {cand};
    try {
      validate_spec(probe, config);
    } catch (const ParameterError&) {
      continue;
    }
    const Vec3 c0 = to_vec(cand.tip);
    const Vec3 c1 = c0 + static_cast<double>(knife.length) * to_vec(knife_axis(cand, knife));
    bool ok = true;
    for (const auto& other : poses) {
      const Vec3 o0 = to_vec(other.tip);
      const Vec3 o1 = o0 + static_cast<double>(knife.length) * to_vec(knife_axis(other, knife));
      if (std::sqrt(dot(c0 - o0, c0 - o0)) < min_tip_separation ||
          segment_distance(c0, c1, o0, o1) < 2.0 * r) {
        ok = false;
        break;
      }
    }
    if (ok) poses.push_back(cand);
  }
  return poses;
}

std::vector<BenchmarkInstance> generate_benchmark(const BenchmarkOptions& options,
                                                  const SceneConfig& config) {
  if (options.instances_per_count < 1) {
    throw ParameterError("benchmark needs at least one instance per count");
  }
  if (options.min_knives < 0 || options.max_knives < options.min_knives ||
      static_cast<std::size_t>(options.max_knives) > kMaxKnives) {
    throw ParameterError("invalid knife count range");
  }
  std::vector<BenchmarkInstance> suite;
  for (int count = options.min_knives; count <= options.max_knives; ++count) {
    for (std::size_t i = 0; i < options.instances_per_count; ++i) {
      BenchmarkInstance inst;
      inst.spec = options.template_spec;
      inst.spec.hand_intervals.clear();
      // Mix seed, count and instance index into one 64-bit instance seed.
      std::seed_seq seq{static_cast<std::uint32_t>(options.seed),
                        static_cast<std::uint32_t>(options.seed >> 32),
                        static_cast<std::uint32_t>(count), static_cast<std::uint32_t>(i)};
      std::array<std::uint32_t, 2> words{};
      seq.generate(words.begin(), words.end());
      inst.spec.seed = (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
      inst.spec.knives = place_knives(static_cast<std::size_t>(count), options.min_tip_separation,
                                      inst.spec.seed, config, options.max_attempts);
      inst.truth = ground_truth_for(inst.spec);
      suite.push_back(std::move(inst));
    }
  }
  return suite;
}

std::string ground_truth_to_json(const GroundTruth& truth) {
  nlohmann::json j;
  j["counts"] = truth.counts;
  j["knives"] = nlohmann::json::array();
  for (const auto& k : truth.knives) {
    j["knives"].push_back({{"tip", {k.tip.x, k.tip.y, k.tip.z}}, {"yaw", k.yaw}});
  }
  j["hand_intervals"] = nlohmann::json::array();
  for (const auto& h : truth.hand_intervals) {
    j["hand_intervals"].push_back({h.start, h.end});
  }
  return j.dump();
}

GroundTruth ground_truth_from_json(const std::string& text) {
  GroundTruth truth;
  try {
    const auto j = nlohmann::json::parse(text);
    truth.counts = j.at("counts").get<std::vector<std::size_t>>();
    for (const auto& k : j.at("knives")) {
      const auto tip = k.at("tip").get<std::vector<float>>();
      if (tip.size() != 3) throw FormatError("knife tip must have three coordinates");
      truth.knives.push_back({{tip[0], tip[1], tip[2]}, k.at("yaw").get<double>()});
    }
    for (const auto& h : j.at("hand_intervals")) {
      const auto iv = h.get<std::vector<double>>();
      if (iv.size() != 2) throw FormatError("hand interval must be [start, end]");
      truth.hand_intervals.push_back({iv[0], iv[1]});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("ground truth JSON: ") + e.what());
  }
  return truth;
}

}  // namespace sanitrack
