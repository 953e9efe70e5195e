#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sanitrack/pipeline.hpp"

using namespace sanitrack;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool print_config = false;
};

PipelineConfig effective_config(const Common& common) {
  PipelineConfig config = common.config_path.empty() ? PipelineConfig{}
                                                     : PipelineConfig::load(common.config_path);
  if (common.seed) config.seed = *common.seed;
  config.validate();
  return config;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  return out;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string truth_path_for(const std::string& sequence_path) {
  const auto dot = sequence_path.rfind('.');
  const auto slash = sequence_path.find_last_of('/');
  const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
  return (has_ext ? sequence_path.substr(0, dot) : sequence_path) + ".truth.json";
}

void write_or_print(const Common& common, const std::string& text) {
  if (common.out.empty()) {
    std::cout << text << '\n';
  } else {
    auto out = open_out(common.out);
    out << text << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knife sanitization monitor: ToF detection, tracking and dwell compliance"};
  app.require_subcommand(1);
  app.fallthrough();

  Common common;
  app.add_option("--config", common.config_path, "Pipeline config JSON")->check(CLI::ExistingFile);
  app.add_option("--seed", common.seed, "Override config seed");
  app.add_option("--out", common.out, "Output path");
  app.add_flag("--print-config", common.print_config, "Print the effective config and continue");

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic sequence and ground truth");
  std::size_t gen_knives = 3;
  std::size_t gen_frames = 150;
  double gen_noise = 0.002;
  double gen_dropout = 0.0;
  double gen_separation = 0.04;
  std::vector<double> gen_hands;
  std::string gen_truth;
  gen->add_option("--knives", gen_knives, "Knife count (0 = empty bath)")->check(CLI::Range(0, 8));
  gen->add_option("--frames", gen_frames, "Frame count")->check(CLI::PositiveNumber);
  gen->add_option("--noise", gen_noise, "Per-axis noise sigma, m")->check(CLI::NonNegativeNumber);
  gen->add_option("--dropout", gen_dropout, "Per-point dropout probability")->check(CLI::Range(0.0, 0.999));
  gen->add_option("--separation", gen_separation, "Minimum tip separation, m");
  gen->add_option("--hand", gen_hands, "Hand interval start,end in seconds (repeatable)")
      ->delimiter(',')
      ->expected(0, -1);
  gen->add_option("--truth", gen_truth, "Ground-truth JSON path (default <out>.truth.json)");

  // prescan
  auto* prescan = app.add_subcommand("prescan", "Build a background model from an empty-bath sequence");
  std::string prescan_in;
  prescan->add_option("--in", prescan_in, "Prescan sequence")->required()->check(CLI::ExistingFile);

  // run
  auto* run = app.add_subcommand("run", "Run the pipeline, writing the ND-JSON event log");
  std::string run_sequence, run_model, run_prescan, run_truth, run_hands, run_report;
  run->add_option("--sequence", run_sequence, "Input sequence");
  run->add_option("--model", run_model, "Background model");
  run->add_option("--prescan", run_prescan, "Prescan sequence (builds the model)");
  run->add_option("--ground-truth", run_truth, "Ground-truth JSON supplying hand intervals");
  run->add_option("--hand-events", run_hands, "One 0/1 hand flag per frame");
  run->add_option("--report", run_report, "Final compliance report JSON");

  // eval
  auto* eval = app.add_subcommand("eval", "Count metrics from a run log, or the synthetic benchmark");
  std::string eval_log, eval_truth;
  bool eval_benchmark = false;
  std::size_t eval_instances = 50;
  bool eval_text = false;
  eval->add_option("--log", eval_log, "ND-JSON event log");
  eval->add_option("--ground-truth", eval_truth, "Ground-truth JSON");
  eval->add_flag("--benchmark", eval_benchmark, "Run the 1..5 knife synthetic benchmark");
  eval->add_option("--instances", eval_instances, "Instances per knife count")->check(CLI::PositiveNumber);
  eval->add_flag("--table", eval_text, "Print the text table instead of JSON");

  // export-heatmap
  auto* hm = app.add_subcommand("export-heatmap", "Write a density heatmap PGM for one frame");
  std::string hm_sequence, hm_model, hm_prescan;
  std::size_t hm_frame = 0;
  std::uint32_t hm_cell = 1;
  bool hm_filtered = false;
  hm->add_option("--sequence", hm_sequence, "Input sequence");
  hm->add_option("--model", hm_model, "Background model");
  hm->add_option("--prescan", hm_prescan, "Prescan sequence");
  hm->add_option("--frame", hm_frame, "Frame index");
  hm->add_option("--cell", hm_cell, "Downsampling cell size, px")->check(CLI::PositiveNumber);
  hm->add_flag("--filtered", hm_filtered, "Only points above the density percentile");

  // bench
  auto* bench = app.add_subcommand("bench", "Per-stage latency statistics");
  std::string bench_sequence, bench_model, bench_prescan;
  std::size_t bench_frames = 150;
  bench->add_option("--sequence", bench_sequence, "Input sequence (default: synthetic 5-knife scene)");
  bench->add_option("--model", bench_model, "Background model");
  bench->add_option("--prescan", bench_prescan, "Prescan sequence");
  bench->add_option("--frames", bench_frames, "Synthetic frame count")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    PipelineConfig config = effective_config(common);
    const auto set_io = [](std::string& slot, const std::string& value) {
      if (!value.empty()) slot = value;
    };

    if (*gen) {
      if (common.out.empty()) throw ConfigError("gen needs --out");
      if (gen_hands.size() % 2 != 0) throw ConfigError("--hand takes start,end pairs");
      ScenarioSpec spec;
      spec.frame_count = gen_frames;
      spec.noise_sigma = gen_noise;
      spec.dropout = gen_dropout;
      spec.seed = config.seed;
      for (std::size_t i = 0; i < gen_hands.size(); i += 2) {
        spec.hand_intervals.push_back({gen_hands[i], gen_hands[i + 1]});
      }
      const SceneConfig scene;
      spec.knives = place_knives(gen_knives, gen_separation, config.seed, scene);
      const auto seq = generate_sequence(spec, scene);
      save_sequence(common.out, seq.frames, scene.intrinsics);
      const std::string truth = gen_truth.empty() ? truth_path_for(common.out) : gen_truth;
      auto out = open_out(truth);
      out << ground_truth_to_json(seq.truth) << '\n';
    }

    if (*prescan) {
      if (common.out.empty()) throw ConfigError("prescan needs --out");
      const auto seq = load_sequence(prescan_in);
      BackgroundModel::build(seq.frames, config.voxel_size, config.fine_radius).save(std::filesystem::path(common.out));
    }

    if (*run) {
      set_io(config.io.sequence, run_sequence);
      set_io(config.io.model, run_model);
      set_io(config.io.prescan, run_prescan);
      set_io(config.io.ground_truth, run_truth);
      set_io(config.io.hand_events, run_hands);
      set_io(config.io.report, run_report);
      set_io(config.io.events, common.out);
      if (common.print_config) std::cerr << config.to_json() << '\n';
      RunSummary summary;
      if (config.io.events.empty()) {
        summary = run_pipeline(config, &std::cout);
      } else {
        // Inputs are checked before the log file is created.
        if (config.io.model.empty() && config.io.prescan.empty()) {
          throw ConfigError("run needs a background model (io.model) or prescan sequence (io.prescan)");
        }
        auto out = open_out(config.io.events);
        summary = run_pipeline(config, &out);
      }
      return summary.errors == 0 ? 0 : 1;
    }

    if (*eval) {
      nlohmann::json result;
      if (eval_benchmark) {
        BenchmarkOptions options;
        options.seed = config.seed;
        options.instances_per_count = eval_instances;
        const auto bench_run = run_benchmark(options, config);
        const auto table = benchmark_table(bench_run.results);
        write_or_print(common, eval_text ? table.to_text() : table.to_json());
      } else {
        if (eval_log.empty() || eval_truth.empty()) {
          throw ConfigError("eval needs --log and --ground-truth, or --benchmark");
        }
        const auto truth = ground_truth_from_json(read_text(eval_truth));
        std::ifstream log(eval_log);
        if (!log) throw ConfigError("cannot open " + eval_log);
        const auto series = counts_from_log(log, truth);
        const auto n = static_cast<std::int64_t>(truth.knives.size());
        const auto errors = count_errors(series, std::max<std::int64_t>(n, 1));
        result = {{"objects", n},
                  {"samples", series.predicted.size()},
                  {"mae", errors.mae},
                  {"rmse", errors.rmse},
                  {"nrmse", n > 0 ? nlohmann::json(errors.nrmse) : nlohmann::json(nullptr)}};
        write_or_print(common, result.dump(2));
      }
    }

    if (*hm) {
      set_io(config.io.sequence, hm_sequence);
      set_io(config.io.model, hm_model);
      set_io(config.io.prescan, hm_prescan);
      if (config.io.sequence.empty()) throw ConfigError("export-heatmap needs --sequence");
      if (common.out.empty()) throw ConfigError("export-heatmap needs --out");
      const auto seq = load_sequence(config.io.sequence);
      if (hm_frame >= seq.frames.size()) throw ConfigError("--frame is beyond the sequence");
      Pipeline pipeline(config, load_background(config), seq.header.intrinsics);
      for (std::size_t i = 0; i <= hm_frame; ++i) {
        const auto out = pipeline.process(seq.frames[i]);
        if (out.error) throw Error(*out.error);
      }
      const auto& cloud = hm_filtered ? pipeline.last_filtered() : pipeline.last_density();
      heatmap(cloud, seq.header.intrinsics, hm_cell).write_pgm(std::filesystem::path(common.out));
    }

    if (*bench) {
      set_io(config.io.sequence, bench_sequence);
      set_io(config.io.model, bench_model);
      set_io(config.io.prescan, bench_prescan);
      std::vector<PointCloudFrame> frames;
      std::optional<BackgroundModel> model;
      CameraIntrinsics intrinsics;
      if (config.io.sequence.empty()) {
        const SceneConfig scene;
        ScenarioSpec spec;
        spec.seed = config.seed;
        spec.frame_count = bench_frames;
        model = BackgroundModel::build(generate_background(spec, scene), config.voxel_size,
                                       config.fine_radius);
        spec.knives = place_knives(5, 0.04, config.seed, scene);
        frames = generate_sequence(spec, scene).frames;
        intrinsics = scene.intrinsics;
      } else {
        const auto seq = load_sequence(config.io.sequence);
        frames = seq.frames;
        intrinsics = seq.header.intrinsics;
        model = load_background(config);
      }
      Pipeline pipeline(config, std::move(*model), intrinsics);
      std::vector<StageTimings> timings;
      std::vector<bool> gated;
      std::size_t max_points = 0;
      for (const auto& f : frames) {
        const auto out = pipeline.process(f);
        if (out.error) throw Error(*out.error);
        timings.push_back(out.timings);
        gated.push_back(out.gated);
        max_points = std::max(max_points, out.accumulated_points);
      }
      write_or_print(common, bench_report(timings, gated, max_points).to_json());
    }

    if (common.print_config && !*run) std::cerr << config.to_json() << '\n';
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
