#include "sanitrack/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <istream>
#include <ostream>
#include <string>

#include "json.hpp"
#include "sanitrack/cluster.hpp"

namespace sanitrack {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

json point_json(const Point3& p) {
  return json::array({static_cast<double>(p.x), static_cast<double>(p.y), static_cast<double>(p.z)});
}

}  // namespace

std::uint64_t frame_seed(std::uint64_t seed, std::size_t frame) {
  // splitmix64 finalizer over the combined words
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(frame) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Pipeline::Pipeline(PipelineConfig config, BackgroundModel model, CameraIntrinsics intrinsics)
    : config_(std::move(config)),
      model_(std::move(model)),
      intrinsics_(intrinsics),
      accumulator_(config_.window),
      tracker_(config_.sort),
      compliance_(config_.compliance) {
  config_.validate();
  intrinsics_.validate();
}

void Pipeline::hand_event(const HandEvent& event) {
  const bool was_gated = compliance_.gated();
  compliance_.on_hand_event(event);
  if (!was_gated && compliance_.gated()) accumulator_.clear();
}

std::vector<TrackRecord> Pipeline::frozen_tracks() const {
  std::vector<TrackRecord> out = last_tracks_;
  for (auto& t : out) {
    if (const auto* rec = compliance_.record(t.id)) {
      t.status = rec->status;
      t.dwell = rec->dwell;
    }
  }
  return out;
}

FrameOutput Pipeline::process(const PointCloudFrame& frame) {
  FrameOutput out;
  out.frame = frame_index_++;
  out.timestamp = frame.timestamp;
  out.gated = compliance_.gated();
  const auto start = Clock::now();

  try {
    if (out.gated) {
      auto t0 = Clock::now();
      auto step = compliance_.step({}, frame.timestamp);
      out.timings.compliance = elapsed_ms(t0);
      out.changes = std::move(step.changes);
      out.tracks = frozen_tracks();
      out.timings.total = elapsed_ms(start);
      return out;
    }

    auto t0 = Clock::now();
    PointList foreground = subtract(frame, model_);
    out.timings.subtract = elapsed_ms(t0);
    out.foreground_points = foreground.size();

    t0 = Clock::now();
    accumulator_.push(std::move(foreground), frame.timestamp);
    const PointList cloud = accumulator_.current_cloud();
    out.timings.accumulate = elapsed_ms(t0);
    out.accumulated_points = cloud.size();

    t0 = Clock::now();
    const PointList sample =
        subsample(cloud, config_.subsample_target, frame_seed(config_.seed, out.frame));
    out.timings.subsample = elapsed_ms(t0);

    ClusterResult clusters;
    if (!sample.empty()) {
      t0 = Clock::now();
      last_density_ = kde(sample, config_.bandwidth);
      out.timings.kde = elapsed_ms(t0);

      t0 = Clock::now();
      last_filtered_ = percentile_filter(last_density_, config_.percentile);
      out.timings.percentile = elapsed_ms(t0);

      t0 = Clock::now();
      clusters = hdbscan(last_filtered_.points, config_.cluster);
      out.timings.cluster = elapsed_ms(t0);
    } else {
      last_density_ = DensityCloud{{}, {}, config_.bandwidth};
      last_filtered_ = last_density_;
    }
    for (std::size_t c = 0; c < clusters.cluster_count(); ++c) {
      out.clusters.push_back({clusters.sizes[c], clusters.centroids[c]});
    }

    t0 = Clock::now();
    const DetectionSet detections =
        detections_from_clusters(clusters, last_filtered_.points, intrinsics_, config_.boxes);
    out.timings.boxes = elapsed_ms(t0);
    out.skipped_detections = detections.skipped;

    t0 = Clock::now();
    const auto tracks = tracker_.step(detections.boxes);
    out.timings.track = elapsed_ms(t0);

    t0 = Clock::now();
    std::vector<std::uint64_t> ids;
    ids.reserve(tracks.size());
    for (const auto& t : tracks) ids.push_back(t.id);
    auto step = compliance_.step(ids, frame.timestamp);
    out.timings.compliance = elapsed_ms(t0);
    out.changes = std::move(step.changes);

    for (std::size_t i = 0; i < tracks.size(); ++i) {
      TrackRecord rec;
      rec.id = tracks[i].id;
      rec.box = tracks[i].box;
      rec.status = step.records[i].status;
      rec.dwell = step.records[i].dwell;
      out.tracks.push_back(rec);
    }
    last_tracks_ = out.tracks;
  } catch (const Error& e) {
    out.error = e.what();
  }
  out.timings.total = elapsed_ms(start);
  return out;
}

std::vector<HandEvent> hand_events_from_intervals(const std::vector<HandInterval>& intervals) {
  std::vector<HandEvent> events;
  for (const auto& iv : intervals) {
    events.push_back({iv.start, true});
    events.push_back({iv.end, false});
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const HandEvent& a, const HandEvent& b) { return a.timestamp < b.timestamp; });
  return events;
}

std::vector<HandEvent> hand_events_from_flags(std::istream& in,
                                              const std::vector<PointCloudFrame>& frames) {
  std::vector<HandEvent> events;
  bool state = false;
  std::string line;
  std::size_t i = 0;
  while (std::getline(in, line)) {
    line.erase(std::remove_if(line.begin(), line.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); }),
               line.end());
    if (line.empty()) continue;
    if (line != "0" && line != "1") {
      throw FormatError("hand flag line " + std::to_string(i) + " is not 0 or 1");
    }
    if (i >= frames.size()) throw FormatError("more hand flags than frames");
    const bool present = line == "1";
    if (present != state) events.push_back({frames[i].timestamp, present});
    state = present;
    ++i;
  }
  if (i != frames.size()) {
    throw FormatError("hand flag file has " + std::to_string(i) + " entries for " +
                      std::to_string(frames.size()) + " frames");
  }
  return events;
}

std::string frame_record_json(const FrameOutput& out) {
  json clusters = json::array();
  for (const auto& c : out.clusters) {
    clusters.push_back({{"size", c.size}, {"centroid", point_json(c.centroid)}});
  }
  json tracks = json::array();
  for (const auto& t : out.tracks) {
    tracks.push_back({{"id", t.id},
                      {"box", json::array({t.box.u_min, t.box.v_min, t.box.u_max, t.box.v_max})},
                      {"status", std::string(to_string(t.status))},
                      {"dwell", t.dwell}});
  }
  json j = {{"frame", out.frame},
            {"t", out.timestamp},
            {"gated", out.gated},
            {"clusters", clusters},
            {"tracks", tracks}};
  return j.dump();
}

std::string status_change_json(const StatusChange& change) {
  return json{{"t", change.timestamp},
              {"event", "status_change"},
              {"id", change.track_id},
              {"status", std::string(to_string(change.status))}}
      .dump();
}

std::string hand_event_json(const HandEvent& event) {
  return json{{"t", event.timestamp}, {"event", "hand"}, {"present", event.present}}.dump();
}

std::string run_start_json(const CameraIntrinsics& k, std::size_t frames) {
  return json{{"event", "run_start"},
              {"frames", frames},
              {"intrinsics",
               {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width},
                {"height", k.height}}}}
      .dump();
}

std::string error_event_json(std::size_t frame, const std::string& message) {
  return json{{"event", "error"}, {"frame", frame}, {"message", message}}.dump();
}

std::string compliance_report_json(const std::vector<ComplianceRecord>& records,
                                   const ComplianceConfig& config) {
  json tracks = json::array();
  for (const auto& r : records) {
    json presence = json::array();
    for (const auto& p : r.presence) presence.push_back(json::array({p.start, p.end}));
    json entry = {{"id", r.track_id},
                  {"dwell_s", r.dwell},
                  {"status", std::string(to_string(r.status))},
                  {"first_seen", r.first_seen},
                  {"last_seen", r.last_seen},
                  {"presence", presence}};
    entry["ready_at"] = r.ready_at ? json(*r.ready_at) : json(nullptr);
    tracks.push_back(entry);
  }
  return json{{"required_dwell_s", config.required_dwell}, {"tracks", tracks}}.dump(2);
}

RunSummary run_frames(Pipeline& pipeline, const std::vector<PointCloudFrame>& frames,
                      std::vector<HandEvent> hand_events, std::ostream* events) {
  std::stable_sort(hand_events.begin(), hand_events.end(),
                   [](const HandEvent& a, const HandEvent& b) { return a.timestamp < b.timestamp; });
  const auto emit = [&](const std::string& line) {
    if (events) *events << line << '\n';
  };

  RunSummary summary;
  emit(run_start_json(pipeline.intrinsics(), frames.size()));
  std::size_t next_event = 0;
  const auto apply_event = [&](const HandEvent& e, std::size_t frame) {
    try {
      pipeline.hand_event(e);
      emit(hand_event_json(e));
    } catch (const Error& err) {
      ++summary.errors;
      emit(error_event_json(frame, err.what()));
    }
  };

  for (std::size_t i = 0; i < frames.size(); ++i) {
    while (next_event < hand_events.size() &&
           hand_events[next_event].timestamp <= frames[i].timestamp) {
      apply_event(hand_events[next_event++], i);
    }
    const FrameOutput out = pipeline.process(frames[i]);
    emit(frame_record_json(out));
    for (const auto& c : out.changes) emit(status_change_json(c));
    if (out.error) {
      ++summary.errors;
      emit(error_event_json(out.frame, *out.error));
    }
    summary.track_counts.push_back(out.tracks.size());
    summary.gated.push_back(out.gated);
    summary.timings.push_back(out.timings);
  }
  while (next_event < hand_events.size()) apply_event(hand_events[next_event++], frames.size());

  summary.frames = frames.size();
  summary.report = pipeline.compliance().report();
  return summary;
}

BackgroundModel load_background(const PipelineConfig& config) {
  if (!config.io.model.empty()) return BackgroundModel::load(std::filesystem::path(config.io.model));
  if (!config.io.prescan.empty()) {
    const Sequence prescan = load_sequence(config.io.prescan);
    return BackgroundModel::build(prescan.frames, config.voxel_size, config.fine_radius);
  }
  throw ConfigError("run needs a background model (io.model) or prescan sequence (io.prescan)");
}

RunSummary run_pipeline(const PipelineConfig& config, std::ostream* events) {
  if (config.io.sequence.empty()) throw ConfigError("run needs an input sequence (io.sequence)");
  BackgroundModel model = load_background(config);
  const Sequence seq = load_sequence(config.io.sequence);

  std::vector<HandEvent> hands;
  if (!config.io.hand_events.empty()) {
    std::ifstream in(config.io.hand_events);
    if (!in) throw ConfigError("cannot open hand events " + config.io.hand_events);
    hands = hand_events_from_flags(in, seq.frames);
  } else if (!config.io.ground_truth.empty()) {
    std::ifstream in(config.io.ground_truth);
    if (!in) throw ConfigError("cannot open ground truth " + config.io.ground_truth);
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    hands = hand_events_from_intervals(ground_truth_from_json(text).hand_intervals);
  }

  Pipeline pipeline(config, std::move(model), seq.header.intrinsics);
  RunSummary summary = run_frames(pipeline, seq.frames, std::move(hands), events);
  if (!config.io.report.empty()) {
    std::ofstream out(config.io.report);
    if (!out) throw ConfigError("cannot write report " + config.io.report);
    out << compliance_report_json(summary.report, config.compliance) << '\n';
  }
  return summary;
}

LatencyStats latency_stats(std::vector<double> values) {
  LatencyStats s;
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  const auto rank = [&](double p) {
    const auto r = static_cast<std::size_t>(std::ceil(p * static_cast<double>(values.size()) - 1e-9));
    return values[std::clamp<std::size_t>(r, 1, values.size()) - 1];
  };
  s.median = rank(0.5);
  s.p95 = rank(0.95);
  s.max = values.back();
  return s;
}

BenchReport bench_report(const std::vector<StageTimings>& timings, const std::vector<bool>& gated,
                         std::size_t max_accumulated_points) {
  using Field = double StageTimings::*;
  static const std::pair<const char*, Field> fields[] = {
      {"subtract", &StageTimings::subtract},     {"accumulate", &StageTimings::accumulate},
      {"subsample", &StageTimings::subsample},   {"kde", &StageTimings::kde},
      {"percentile", &StageTimings::percentile}, {"cluster", &StageTimings::cluster},
      {"boxes", &StageTimings::boxes},           {"track", &StageTimings::track},
      {"compliance", &StageTimings::compliance},
  };
  std::vector<const StageTimings*> used;
  for (std::size_t i = 0; i < timings.size(); ++i) {
    if (i >= gated.size() || !gated[i]) used.push_back(&timings[i]);
  }
  BenchReport report;
  report.frames = used.size();
  report.max_accumulated_points = max_accumulated_points;
  std::vector<double> values;
  for (const auto& [name, field] : fields) {
    values.clear();
    for (const auto* t : used) values.push_back(t->*field);
    report.stages.emplace_back(name, latency_stats(values));
  }
  values.clear();
  for (const auto* t : used) values.push_back(t->total);
  report.end_to_end = latency_stats(values);
  return report;
}

std::string BenchReport::to_json() const {
  const auto stats = [](const LatencyStats& s) {
    return json{{"median_ms", s.median}, {"p95_ms", s.p95}, {"max_ms", s.max}};
  };
  json stage_json = json::object();
  for (const auto& [name, s] : stages) stage_json[name] = stats(s);
  return json{{"frames", frames},
              {"max_accumulated_points", max_accumulated_points},
              {"end_to_end", stats(end_to_end)},
              {"stages", stage_json}}
      .dump(2);
}

CountSeries counts_from_log(std::istream& log, const GroundTruth& truth) {
  CountSeries series;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(log, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      throw FormatError("event log line " + std::to_string(line_no) + " is not JSON");
    }
    if (!j.contains("frame") || j.contains("event")) continue;
    const auto frame = j.at("frame").get<std::size_t>();
    if (frame >= truth.counts.size()) {
      throw FormatError("event log frame " + std::to_string(frame) + " beyond ground truth");
    }
    if (j.value("gated", false)) continue;
    series.predicted.push_back(static_cast<std::int64_t>(j.at("tracks").size()));
    series.truth.push_back(static_cast<std::int64_t>(truth.counts[frame]));
  }
  return series;
}

BenchmarkRun run_benchmark(const BenchmarkOptions& options, const PipelineConfig& config,
                           const SceneConfig& scene) {
  const auto start = Clock::now();
  ScenarioSpec empty = options.template_spec;
  empty.knives.clear();
  empty.hand_intervals.clear();
  empty.seed = options.seed;
  const auto prescan = generate_background(empty, scene);
  const BackgroundModel model =
      BackgroundModel::build(prescan, config.voxel_size, config.fine_radius);

  BenchmarkRun run;
  std::map<std::int64_t, CountSeries> by_count;
  for (const auto& instance : generate_benchmark(options, scene)) {
    const auto seq = generate_sequence(instance.spec, scene);
    Pipeline pipeline(config, model, scene.intrinsics);
    const auto summary =
        run_frames(pipeline, seq.frames, hand_events_from_intervals(seq.truth.hand_intervals), nullptr);
    CountSeries series;
    for (std::size_t f = 0; f < summary.frames; ++f) {
      if (summary.gated[f]) continue;
      series.predicted.push_back(static_cast<std::int64_t>(summary.track_counts[f]));
      series.truth.push_back(static_cast<std::int64_t>(seq.truth.counts[f]));
    }
    run.per_instance.push_back(series);
    auto& agg = by_count[static_cast<std::int64_t>(instance.spec.knives.size())];
    agg.predicted.push_back(series.predicted.empty() ? 0 : series.predicted.back());
    agg.truth.push_back(series.truth.empty() ? 0 : series.truth.back());
  }
  for (auto& [n, series] : by_count) run.results.push_back({n, std::move(series)});
  run.seconds = elapsed_ms(start) / 1000.0;
  return run;
}

}  // namespace sanitrack
