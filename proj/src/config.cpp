#include "sanitrack/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "json.hpp"

namespace sanitrack {

namespace {

using nlohmann::json;
using Setter = std::function<void(const json&, PipelineConfig&)>;

template <typename T>
T as(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

std::size_t as_count(const json& v, const std::string& key) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw ConfigError("config key '" + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

template <int N>
Eigen::Matrix<double, N, N> diagonal(const json& v, const std::string& key) {
  const auto values = as<std::vector<double>>(v, key);
  if (values.size() != N) {
    throw ConfigError("config key '" + key + "' needs " + std::to_string(N) + " diagonal entries");
  }
  Eigen::Matrix<double, N, 1> d;
  for (int i = 0; i < N; ++i) d(i) = values[static_cast<std::size_t>(i)];
  return d.asDiagonal();
}

template <int N>
std::vector<double> diagonal_of(const Eigen::Matrix<double, N, N>& m) {
  std::vector<double> out(N);
  for (int i = 0; i < N; ++i) out[static_cast<std::size_t>(i)] = m(i, i);
  return out;
}

BoxMode parse_box_mode(const std::string& s) {
  if (s == "cluster_extent") return BoxMode::kClusterExtent;
  if (s == "centroid") return BoxMode::kCentroid;
  throw ConfigError("tracker.box_mode must be 'cluster_extent' or 'centroid'");
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"seed", [](const json& v, PipelineConfig& c) { c.seed = as<std::uint64_t>(v, "seed"); }},
      {"background.voxel_size_m",
       [](const json& v, PipelineConfig& c) { c.voxel_size = as<double>(v, "background.voxel_size_m"); }},
      {"background.fine_radius_m",
       [](const json& v, PipelineConfig& c) { c.fine_radius = as<double>(v, "background.fine_radius_m"); }},
      {"accumulator.k", [](const json& v, PipelineConfig& c) { c.window = as_count(v, "accumulator.k"); }},
      {"accumulator.subsample_target",
       [](const json& v, PipelineConfig& c) {
         c.subsample_target = as_count(v, "accumulator.subsample_target");
       }},
      {"density.bandwidth_m",
       [](const json& v, PipelineConfig& c) { c.bandwidth = as<double>(v, "density.bandwidth_m"); }},
      {"density.percentile",
       [](const json& v, PipelineConfig& c) { c.percentile = as<double>(v, "density.percentile"); }},
      {"cluster.min_cluster_size",
       [](const json& v, PipelineConfig& c) {
         c.cluster.min_cluster_size = as_count(v, "cluster.min_cluster_size");
       }},
      {"cluster.min_samples",
       [](const json& v, PipelineConfig& c) { c.cluster.min_samples = as_count(v, "cluster.min_samples"); }},
      {"tracker.iou_min",
       [](const json& v, PipelineConfig& c) { c.sort.iou_min = as<double>(v, "tracker.iou_min"); }},
      {"tracker.max_age",
       [](const json& v, PipelineConfig& c) { c.sort.max_age = as_count(v, "tracker.max_age"); }},
      {"tracker.min_hits",
       [](const json& v, PipelineConfig& c) { c.sort.min_hits = as_count(v, "tracker.min_hits"); }},
      {"tracker.box_mode",
       [](const json& v, PipelineConfig& c) {
         c.boxes.mode = parse_box_mode(as<std::string>(v, "tracker.box_mode"));
       }},
      {"tracker.box_pad_px",
       [](const json& v, PipelineConfig& c) { c.boxes.pad_px = as<double>(v, "tracker.box_pad_px"); }},
      {"tracker.kalman_r",
       [](const json& v, PipelineConfig& c) { c.sort.noise.R = diagonal<4>(v, "tracker.kalman_r"); }},
      {"tracker.kalman_q",
       [](const json& v, PipelineConfig& c) { c.sort.noise.Q = diagonal<7>(v, "tracker.kalman_q"); }},
      {"tracker.kalman_p0",
       [](const json& v, PipelineConfig& c) { c.sort.noise.P0 = diagonal<7>(v, "tracker.kalman_p0"); }},
      {"compliance.required_dwell_s",
       [](const json& v, PipelineConfig& c) {
         c.compliance.required_dwell = as<double>(v, "compliance.required_dwell_s");
       }},
      {"io.sequence", [](const json& v, PipelineConfig& c) { c.io.sequence = as<std::string>(v, "io.sequence"); }},
      {"io.model", [](const json& v, PipelineConfig& c) { c.io.model = as<std::string>(v, "io.model"); }},
      {"io.prescan", [](const json& v, PipelineConfig& c) { c.io.prescan = as<std::string>(v, "io.prescan"); }},
      {"io.ground_truth",
       [](const json& v, PipelineConfig& c) { c.io.ground_truth = as<std::string>(v, "io.ground_truth"); }},
      {"io.hand_events",
       [](const json& v, PipelineConfig& c) { c.io.hand_events = as<std::string>(v, "io.hand_events"); }},
      {"io.events", [](const json& v, PipelineConfig& c) { c.io.events = as<std::string>(v, "io.events"); }},
      {"io.report", [](const json& v, PipelineConfig& c) { c.io.report = as<std::string>(v, "io.report"); }},
  };
  return table;
}

}  // namespace

void PipelineConfig::validate() const {
  const auto require = [](bool ok, const char* message) {
    if (!ok) throw ConfigError(message);
  };
  require(voxel_size > 0.0, "background.voxel_size_m must be positive");
  require(fine_radius > 0.0, "background.fine_radius_m must be positive");
  require(window >= 1, "accumulator.k must be at least 1");
  require(subsample_target >= 1, "accumulator.subsample_target must be at least 1");
  require(bandwidth > 0.0, "density.bandwidth_m must be positive");
  require(percentile >= 0.0 && percentile <= 100.0, "density.percentile must lie in [0, 100]");
  require(cluster.min_cluster_size >= 2, "cluster.min_cluster_size must be at least 2");
  require(cluster.min_samples >= 1, "cluster.min_samples must be at least 1");
  require(sort.iou_min >= 0.0 && sort.iou_min <= 1.0, "tracker.iou_min must lie in [0, 1]");
  require(sort.min_hits >= 1, "tracker.min_hits must be at least 1");
  require(boxes.pad_px >= 0.0, "tracker.box_pad_px must be non-negative");
  require(compliance.required_dwell > 0.0, "compliance.required_dwell_s must be positive");
  require((sort.noise.R.diagonal().array() >= 0.0).all() &&
              (sort.noise.Q.diagonal().array() >= 0.0).all() &&
              (sort.noise.P0.diagonal().array() > 0.0).all(),
          "Kalman noise diagonals must be non-negative (P0 positive)");
}

std::string PipelineConfig::to_json(int indent) const {
  json j;
  j["seed"] = seed;
  j["background.voxel_size_m"] = voxel_size;
  j["background.fine_radius_m"] = fine_radius;
  j["accumulator.k"] = window;
  j["accumulator.subsample_target"] = subsample_target;
  j["density.bandwidth_m"] = bandwidth;
  j["density.percentile"] = percentile;
  j["cluster.min_cluster_size"] = cluster.min_cluster_size;
  j["cluster.min_samples"] = cluster.min_samples;
  j["tracker.iou_min"] = sort.iou_min;
  j["tracker.max_age"] = sort.max_age;
  j["tracker.min_hits"] = sort.min_hits;
  j["tracker.box_mode"] = boxes.mode == BoxMode::kCentroid ? "centroid" : "cluster_extent";
  j["tracker.box_pad_px"] = boxes.pad_px;
  j["tracker.kalman_r"] = diagonal_of<4>(sort.noise.R);
  j["tracker.kalman_q"] = diagonal_of<7>(sort.noise.Q);
  j["tracker.kalman_p0"] = diagonal_of<7>(sort.noise.P0);
  j["compliance.required_dwell_s"] = compliance.required_dwell;
  j["io.sequence"] = io.sequence;
  j["io.model"] = io.model;
  j["io.prescan"] = io.prescan;
  j["io.ground_truth"] = io.ground_truth;
  j["io.hand_events"] = io.hand_events;
  j["io.events"] = io.events;
  j["io.report"] = io.report;
  return j.dump(indent);
}

PipelineConfig PipelineConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  PipelineConfig config;
  const auto& table = setters();
  for (const auto& [key, value] : j.items()) {
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(value, config);
  }
  config.validate();
  return config;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

}  // namespace sanitrack
