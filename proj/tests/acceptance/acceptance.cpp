#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "sanitrack/pipeline.hpp"

using namespace sanitrack;

namespace {

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt2(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

DetectionBox centered(double u, double v, double w, double h) {
  DetectionBox b;
  b.u_min = u - w / 2;
  b.v_min = v - h / 2;
  b.u_max = u + w / 2;
  b.v_max = v + h / 2;
  return b;
}

BackgroundModel empty_bath_model(std::uint64_t seed) {
  ScenarioSpec empty;
  empty.seed = seed;
  empty.frame_count = 10;
  return BackgroundModel::build(generate_background(empty), kDefaultVoxelSize, kDefaultFineRadius);
}

void table_consistency() {
  struct Row {
    std::int64_t n;
    double rmse;
    double nrmse;
  };
  const Row rows[] = {{1, 0.410, 0.410}, {2, 0.924, 0.462}, {3, 1.263, 0.421},
                      {4, 1.520, 0.380}, {5, 1.876, 0.375}};
  double worst = 0.0;
  for (const auto& r : rows) worst = std::max(worst, std::abs(normalized_rmse(r.rmse, r.n) - r.nrmse));
  report("table_nrmse_consistency", worst <= 0.001, fmt("max |RMSE/n - NRMSE| = %.5f (tol 0.001)", worst));
}

void synthetic_benchmark() {
  const auto run = run_benchmark(BenchmarkOptions{}, PipelineConfig{});
  const auto table = benchmark_table(run.results);
  bool ok = true;
  std::string detail;
  for (const auto& row : table.rows) {
    const double mae_limit = row.n_objects <= 2 ? 0.2 : 0.6;
    ok = ok && row.errors.mae <= mae_limit && row.errors.nrmse <= 0.5 && row.samples == 50;
    char buf[96];
    std::snprintf(buf, sizeof buf, "n=%lld mae=%.3f nrmse=%.3f; ", static_cast<long long>(row.n_objects),
                  row.errors.mae, row.errors.nrmse);
    detail += buf;
  }
  report("synthetic_benchmark_counts", ok, detail + "limits mae 0.2 (1-2) / 0.6 (3-5), nrmse 0.5");
  report("synthetic_benchmark_runtime", run.seconds <= 600.0, fmt("%.1f s (limit 600 s)", run.seconds));
}

// Two parallel handles whose surfaces are 1 cm apart.
std::optional<ScenarioSpec> clumped_pair(std::uint64_t seed, const SceneConfig& scene) {
  const double axis_gap = 2.0 * scene.knife.radius + 0.01;
  for (std::uint64_t attempt = 0; attempt < 50; ++attempt) {
    ScenarioSpec spec;
    spec.seed = seed;
    spec.frame_count = 30;
    const auto first = place_knives(1, 0.0, seed * 1000 + attempt, scene).front();
    for (const double side : {1.0, -1.0}) {
      KnifePose second = first;
      second.tip.x += static_cast<float>(-std::sin(first.yaw) * axis_gap * side);
      second.tip.y += static_cast<float>(std::cos(first.yaw) * axis_gap * side);
      spec.knives = {first, second};
      try {
        validate_spec(spec, scene);
        return spec;
      } catch (const Error&) {
      }
    }
  }
  return std::nullopt;
}

void clumped_stress() {
  const SceneConfig scene;
  const auto model = empty_bath_model(999);
  const int instances = 50;
  int two = 0;
  int built = 0;
  for (int i = 0; i < instances; ++i) {
    const auto spec = clumped_pair(static_cast<std::uint64_t>(i), scene);
    if (!spec) continue;
    ++built;
    const auto seq = generate_sequence(*spec, scene);
    Pipeline pipeline(PipelineConfig{}, model, scene.intrinsics);
    FrameOutput last;
    for (const auto& f : seq.frames) last = pipeline.process(f);
    if (!last.error && last.clusters.size() == 2) ++two;
  }
  const double rate = static_cast<double>(two) / instances;
  report("clumped_pair_separation", built == instances && rate >= 0.9,
         fmt2("%.0f of 50 instances give 2 clusters at default noise, rate %.2f (need >= 0.90)", two, rate));
}

void kde_checks() {
  std::mt19937_64 rng(2024);
  double worst_integral = 0.0;
  for (int c = 0; c < 20; ++c) {
    const auto pts = c % 2 == 0 ? oracle::uniform_cloud(rng, 100, 0.1)
                                : oracle::gaussian_blob(rng, {0, 0, 1}, 0.02, 100);
    const double h = kDefaultBandwidth;
    double cell = 0.0;
    const auto grid = oracle::quadrature_grid(pts, 5.0 * h, 0.5 * h, cell);
    double sum = 0.0;
    for (const double d : kde_at(pts, grid, h)) sum += d;
    worst_integral = std::max(worst_integral, std::abs(sum * cell - 1.0));
  }
  report("kde_normalization", worst_integral <= 0.02,
         fmt("max |integral - 1| = %.5f over 20 clouds (tol 0.02)", worst_integral));

  double worst_rel = 0.0;
  for (int c = 0; c < 6; ++c) {
    auto pts = oracle::gaussian_blob(rng, {0, 0, 1}, 0.02, 600);
    const auto spread = oracle::uniform_cloud(rng, 600 + 300 * static_cast<std::size_t>(c), 0.15);
    pts.insert(pts.end(), spread.begin(), spread.end());
    const auto cloud = kde(pts, kDefaultBandwidth);
    const auto exact = oracle::kde_exact(pts, kDefaultBandwidth);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      worst_rel = std::max(worst_rel, std::abs(cloud.densities[i] - exact[i]) / exact[i]);
    }
  }
  report("kde_cutoff_vs_exact", worst_rel <= 1e-4, fmt("max relative error %.3e (tol 1e-4)", worst_rel));
}

void hdbscan_checks() {
  std::mt19937_64 rng(2025);
  std::uniform_int_distribution<std::size_t> size(20, 500);
  std::uniform_int_distribution<std::size_t> ks(1, 8);
  int exact = 0;
  for (int s = 0; s < 50; ++s) {
    const auto n = size(rng);
    const auto pts = s % 2 == 0 ? oracle::uniform_cloud(rng, n, 0.3) : oracle::gaussian_blob(rng, {0, 0, 1}, 0.05, n);
    const auto core = oracle::core_distances(pts, ks(rng));
    const auto mst = mutual_reachability_mst(pts, core);
    std::vector<double> w;
    for (const auto& e : mst) w.push_back(e.weight);
    std::sort(w.begin(), w.end());
    if (mst.size() == n - 1 && w == oracle::kruskal_weights(pts, core)) ++exact;
  }
  report("mst_matches_kruskal", exact == 50, fmt("%.0f of 50 sets exact", exact));

  int separated = 0;
  std::uniform_real_distribution<double> gap(0.2, 0.6);
  std::uniform_int_distribution<std::size_t> blob(20, 80);
  for (int s = 0; s < 100; ++s) {
    const auto na = blob(rng);
    const auto nb = blob(rng);
    auto pts = oracle::gaussian_blob(rng, {0, 0, 1}, 0.01, na);
    const auto b = oracle::gaussian_blob(rng, {static_cast<float>(gap(rng)), 0.05f, 1.0f}, 0.01, nb);
    pts.insert(pts.end(), b.begin(), b.end());
    const auto result = hdbscan(pts, ClusterParams{});
    if (result.cluster_count() != 2) continue;
    std::set<int> la, lb;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (result.labels[i] == kNoise) continue;
      (i < na ? la : lb).insert(result.labels[i]);
    }
    if (la.size() == 1 && lb.size() == 1 && *la.begin() != *lb.begin()) ++separated;
  }
  report("hdbscan_two_blob_separation", separated == 100, fmt("%.0f of 100 instances", separated));
}

void hungarian_check() {
  std::mt19937_64 rng(2026);
  std::uniform_int_distribution<int> dim(1, 7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int exact = 0;
  for (int t = 0; t < 100; ++t) {
    const auto rows = static_cast<std::size_t>(t < 30 ? 7 : dim(rng));
    const auto cols = static_cast<std::size_t>(t < 30 ? 7 : dim(rng));
    std::vector<double> cost(rows * cols);
    for (auto& c : cost) c = u(rng);
    if (hungarian(cost, rows, cols).total_cost == oracle::assignment_by_enumeration(cost, rows, cols)) ++exact;
  }
  report("hungarian_matches_enumeration", exact == 100, fmt("%.0f of 100 matrices exact", exact));
}

void kalman_check() {
  const KalmanNoise noise = KalmanNoise::sort_defaults();
  const double u0 = 120, v0 = 300, du = 2.5, dv = -1.25;
  KalmanState s = kalman_init(centered(u0, v0, 28, 18), noise);
  double min_eig = 1e300;
  double asym = 0.0;
  double err = 0.0;
  for (int f = 1; f <= 20; ++f) {
    s = kalman_predict(s, noise);
    const double tu = u0 + du * f, tv = v0 + dv * f;
    if (f == 20) err = std::hypot(s.x(0) - tu, s.x(1) - tv);
    min_eig = std::min(min_eig, min_eigenvalue(s.P));
    asym = std::max(asym, (s.P - s.P.transpose()).cwiseAbs().maxCoeff());
    s = kalman_update(s, centered(tu, tv, 28, 18), noise);
    min_eig = std::min(min_eig, min_eigenvalue(s.P));
    asym = std::max(asym, (s.P - s.P.transpose()).cwiseAbs().maxCoeff());
  }
  report("kalman_constant_velocity", err <= 0.5, fmt("frame-20 prediction error %.4f px (tol 0.5)", err));
  report("kalman_covariance_psd", min_eig >= -1e-9 && asym == 0.0,
         fmt2("min eigenvalue %.3e (>= -1e-9), max asymmetry %.1e", min_eig, asym));
}

void sort_checks() {
  SortTracker tracker;
  IdTimeline timeline;
  for (int f = 0; f < 100; ++f) {
    std::vector<DetectionBox> dets;
    std::vector<Pixel> truth;
    for (int k = 0; k < 3; ++k) {
      const double u = 120 + 160 * k + 1.2 * f;
      const double v = 120 + 70 * k + 0.4 * f * (k - 1);
      dets.push_back(centered(u, v, 30, 20));
      truth.push_back({u, v});
    }
    std::vector<PixelTrack> tracks;
    for (const auto& t : tracker.step(dets)) tracks.push_back({t.id, {t.box.center_u(), t.box.center_v()}});
    timeline.push_back(match_objects_to_tracks(truth, tracks));
  }
  const auto switches = id_switches(timeline);
  report("sort_no_id_switches", switches == 0, fmt("%.0f switches over 100 frames", static_cast<double>(switches)));

  SortTracker gap_tracker;
  const auto det = centered(300, 200, 30, 20);
  std::set<std::uint64_t> before, after;
  for (int f = 0; f < 10; ++f) {
    for (const auto& t : gap_tracker.step({det})) before.insert(t.id);
  }
  for (std::size_t f = 0; f < gap_tracker.params().max_age + 1; ++f) gap_tracker.step({});
  for (int f = 0; f < 10; ++f) {
    for (const auto& t : gap_tracker.step({det})) after.insert(t.id);
  }
  std::size_t fresh = 0;
  for (const auto id : after) fresh += before.count(id) == 0 ? 1 : 0;
  report("sort_new_id_after_gap", fresh == 1 && after.size() == 1,
         fmt("%.0f new id(s) after a gap of max_age + 1 frames", static_cast<double>(fresh)));
}

struct Gate {
  double start;
  double end;
};

double ungated_length(double a, double b, const std::vector<Gate>& gates) {
  double len = b - a;
  for (const auto& g : gates) len -= std::max(0.0, std::min(b, g.end) - std::max(a, g.start));
  return len;
}

void compliance_check() {
  std::mt19937_64 rng(2027);
  std::uniform_real_distribution<double> dt(0.02, 0.4);
  std::bernoulli_distribution toggle(0.06);
  std::bernoulli_distribution drop(0.03);
  double worst_dwell = 0.0;
  double worst_ready = 0.0;
  bool monotone = true;
  for (int schedule = 0; schedule < 100; ++schedule) {
    const double required = 2.0 + schedule % 5;
    ComplianceEngine engine({required});
    std::vector<Gate> gates;
    bool gated = false;
    double t = 0.0;
    std::optional<double> prev_t;
    bool prev_present = false;
    double dwell = 0.0;
    std::optional<double> ready_at;
    ComplianceStatus last_status = ComplianceStatus::kSanitizing;
    double last_dwell = 0.0;
    for (int step = 0; step < 250; ++step) {
      if (toggle(rng)) {
        t += dt(rng) / 2;
        engine.on_hand_event({t, !gated});
        if (!gated) {
          gates.push_back({t, 1e300});
        } else {
          gates.back().end = t;
        }
        gated = !gated;
      }
      t += dt(rng);
      const bool present = gated ? prev_present : !drop(rng);
      const std::vector<std::uint64_t> ids = present ? std::vector<std::uint64_t>{1} : std::vector<std::uint64_t>{};
      engine.step(ids, t);
      if (gated) continue;
      if (prev_t && prev_present && present) {
        const double add = ungated_length(*prev_t, t, gates);
        if (!ready_at && dwell + add >= required) {
          double need = required - dwell;
          double cursor = *prev_t;
          for (const auto& g : gates) {
            if (g.end <= cursor || g.start >= t) continue;
            const double free = std::max(0.0, g.start - cursor);
            if (need <= free) break;
            need -= free;
            cursor = std::max(cursor, g.end);
          }
          ready_at = cursor + need;
        }
        dwell += add;
      }
      prev_t = t;
      prev_present = present;
      const auto* rec = engine.record(1);
      if (rec == nullptr) continue;
      worst_dwell = std::max(worst_dwell, std::abs(rec->dwell - dwell));
      if (rec->dwell < last_dwell) monotone = false;
      if (last_status == ComplianceStatus::kReady && rec->status != ComplianceStatus::kReady) monotone = false;
      if ((rec->status == ComplianceStatus::kReady) != (rec->dwell >= required)) monotone = false;
      last_status = rec->status;
      last_dwell = rec->dwell;
      if (ready_at.has_value() != rec->ready_at.has_value()) {
        worst_ready = 1e300;
      } else if (ready_at) {
        worst_ready = std::max(worst_ready, std::abs(*ready_at - *rec->ready_at));
      }
    }
  }
  report("compliance_dwell_exact", worst_dwell <= 1e-9 && worst_ready <= 1e-9,
         fmt2("max dwell error %.2e s, max READY time error %.2e s (tol 1e-9)", worst_dwell, worst_ready));
  report("compliance_ready_sticky", monotone, monotone ? "dwell non-decreasing, READY never reverts"
                                                      : "violation observed");
}

void performance() {
  const SceneConfig scene;
  ScenarioSpec spec;
  spec.seed = 0;
  spec.frame_count = 150;
  const auto model = BackgroundModel::build(generate_background(spec, scene), kDefaultVoxelSize, kDefaultFineRadius);
  spec.knives = place_knives(5, 0.04, 0, scene);
  const auto frames = generate_sequence(spec, scene).frames;
  Pipeline pipeline(PipelineConfig{}, model, scene.intrinsics);
  std::vector<StageTimings> timings;
  std::vector<bool> gated;
  std::size_t max_points = 0;
  for (const auto& f : frames) {
    const auto out = pipeline.process(f);
    timings.push_back(out.timings);
    gated.push_back(out.gated);
    max_points = std::max(max_points, out.accumulated_points);
  }
  const auto bench = bench_report(timings, gated, max_points);
  report("median_frame_latency", bench.end_to_end.median <= 33.0 && max_points <= 20000,
         fmt2("median %.2f ms (limit 33 ms) at %.0f accumulated points", bench.end_to_end.median,
              static_cast<double>(max_points)));
}

void determinism() {
  ScenarioSpec spec;
  spec.seed = 77;
  spec.frame_count = 60;
  spec.knives = place_knives(4, 0.04, 77);
  spec.hand_intervals = {{0.8, 1.1}};
  const auto seq = generate_sequence(spec);
  const auto model = empty_bath_model(78);
  std::string logs[2];
  for (auto& log : logs) {
    PipelineConfig config;
    config.seed = 5;
    Pipeline pipeline(config, model, CameraIntrinsics{});
    std::ostringstream out;
    run_frames(pipeline, seq.frames, hand_events_from_intervals(spec.hand_intervals), &out);
    log = out.str();
  }
  report("deterministic_event_log", !logs[0].empty() && logs[0] == logs[1],
         fmt("two runs, %.0f bytes each, identical", static_cast<double>(logs[0].size())));
}

}  // namespace

int main() {
  const auto start = std::chrono::steady_clock::now();
  table_consistency();
  kde_checks();
  hdbscan_checks();
  hungarian_check();
  kalman_check();
  sort_checks();
  compliance_check();
  performance();
  determinism();
  clumped_stress();
  synthetic_benchmark();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("acceptance finished in %.1f s, %d failure(s)\n", secs, failures);
  return failures == 0 ? 0 : 1;
}
