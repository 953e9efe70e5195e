#include "sanitrack/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>

#include "json.hpp"
#include "sanitrack/tracker.hpp"

namespace sanitrack {

double normalized_rmse(double rmse, std::int64_t n_objects) {
  if (n_objects < 1) throw ParameterError("object count must be at least 1");
  return rmse / static_cast<double>(n_objects);
}

CountErrors count_errors(const CountSeries& series, std::int64_t n_objects) {
  if (series.predicted.size() != series.truth.size()) {
    throw ParameterError("predicted and true count series differ in length");
  }
  if (series.predicted.empty()) throw ParameterError("count series is empty");
  if (n_objects < 1) throw ParameterError("object count must be at least 1");

  double abs_sum = 0.0;
  double sq_sum = 0.0;
  for (std::size_t i = 0; i < series.predicted.size(); ++i) {
    const auto diff = static_cast<double>(series.predicted[i] - series.truth[i]);
    abs_sum += std::abs(diff);
    sq_sum += diff * diff;
  }
  const auto n = static_cast<double>(series.predicted.size());
  CountErrors e;
  e.mae = abs_sum / n;
  e.rmse = std::sqrt(sq_sum / n);
  e.nrmse = normalized_rmse(e.rmse, n_objects);
  return e;
}

std::size_t id_switches(const IdTimeline& timeline) {
  std::size_t switches = 0;
  std::map<std::size_t, std::uint64_t> last;
  for (const auto& frame : timeline) {
    for (std::size_t obj = 0; obj < frame.size(); ++obj) {
      if (!frame[obj]) continue;
      const auto it = last.find(obj);
      if (it != last.end() && it->second != *frame[obj]) ++switches;
      last[obj] = *frame[obj];
    }
  }
  return switches;
}

std::vector<std::optional<std::uint64_t>> match_objects_to_tracks(
    const std::vector<Pixel>& objects, const std::vector<PixelTrack>& tracks, double gate_px) {
  std::vector<std::optional<std::uint64_t>> out(objects.size());
  if (objects.empty() || tracks.empty()) return out;
  const double infeasible = 1e9;
  std::vector<double> cost(objects.size() * tracks.size(), infeasible);
  for (std::size_t i = 0; i < objects.size(); ++i) {
    for (std::size_t j = 0; j < tracks.size(); ++j) {
      const double d = std::hypot(objects[i].u - tracks[j].center.u, objects[i].v - tracks[j].center.v);
      if (d <= gate_px) cost[i * tracks.size() + j] = d;
    }
  }
  const auto assignment = hungarian(cost, objects.size(), tracks.size());
  for (const auto& [i, j] : assignment.pairs) {
    if (cost[i * tracks.size() + j] < infeasible) out[i] = tracks[j].id;
  }
  return out;
}

BenchmarkTable benchmark_table(const std::vector<ScenarioResult>& results) {
  std::map<std::int64_t, const ScenarioResult*> by_count;
  for (const auto& r : results) {
    if (!by_count.emplace(r.n_objects, &r).second) {
      throw ParameterError("duplicate scenario for " + std::to_string(r.n_objects) + " objects");
    }
  }
  BenchmarkTable table;
  for (std::int64_t n = 1; n <= 5; ++n) {
    const auto it = by_count.find(n);
    if (it == by_count.end()) {
      throw ParameterError("benchmark table needs all five scenarios; missing " +
                           std::to_string(n));
    }
    table.rows.push_back({n, it->second->series.predicted.size(),
                          count_errors(it->second->series, n)});
  }
  if (by_count.size() != 5) throw ParameterError("benchmark table covers exactly 1..5 objects");
  return table;
}

std::string BenchmarkTable::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"objects", r.n_objects},
                         {"samples", r.samples},
                         {"mae", r.errors.mae},
                         {"rmse", r.errors.rmse},
                         {"nrmse", r.errors.nrmse}});
  }
  return nlohmann::json{{"rows", rows_json}}.dump(2);
}

std::string BenchmarkTable::to_text() const {
  std::string out = "Object(s)      MAE     RMSE    NRMSE\n";
  char line[96];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%9lld %8.3f %8.3f %8.3f\n", static_cast<long long>(r.n_objects),
                  r.errors.mae, r.errors.rmse, r.errors.nrmse);
    out += line;
  }
  return out;
}

}  // namespace sanitrack
