#include "sanitrack/compliance.hpp"

#include <cmath>
#include <string>

#include "sanitrack/types.hpp"

namespace sanitrack {

std::string_view to_string(ComplianceStatus status) {
  return status == ComplianceStatus::kReady ? "READY" : "SANITIZING";
}

std::string_view status_color(ComplianceStatus status) {
  return status == ComplianceStatus::kReady ? "green" : "red";
}

void ComplianceConfig::validate() const {
  if (!(required_dwell > 0.0) || !std::isfinite(required_dwell)) {
    throw ParameterError("required dwell must be positive");
  }
}

ComplianceEngine::ComplianceEngine(ComplianceConfig config) : config_(config) {
  config_.validate();
}

const ComplianceRecord* ComplianceEngine::record(std::uint64_t id) const {
  const auto it = records_.find(id);
  return it == records_.end() ? nullptr : &it->second;
}

void ComplianceEngine::accrue(ComplianceRecord& rec, std::span<const PresenceInterval> pieces,
                              double until, std::vector<StatusChange>& changes) {
  for (const auto& piece : pieces) {
    const double length = piece.end - piece.start;
    if (rec.status == ComplianceStatus::kSanitizing && rec.dwell + length >= config_.required_dwell) {
      rec.status = ComplianceStatus::kReady;
      rec.ready_at = piece.start + (config_.required_dwell - rec.dwell);
      changes.push_back({until, rec.track_id, ComplianceStatus::kReady});
    }
    rec.dwell += length;
  }
  rec.last_seen = until;
  rec.presence.back().end = until;
}

void ComplianceEngine::on_hand_event(const HandEvent& event) {
  if (event.timestamp < last_time_) {
    throw OrderingError("hand event at t=" + std::to_string(event.timestamp) +
                        " precedes t=" + std::to_string(last_time_));
  }
  last_time_ = event.timestamp;
  if (event.present == gated_) return;
  if (event.present) {
    ungated_.push_back({accrual_base_, event.timestamp});
  } else {
    accrual_base_ = event.timestamp;
  }
  gated_ = event.present;
}

ComplianceEngine::StepResult ComplianceEngine::step(std::span<const std::uint64_t> active_ids,
                                                    double timestamp) {
  if (timestamp < last_time_) {
    throw OrderingError("compliance step at t=" + std::to_string(timestamp) +
                        " precedes t=" + std::to_string(last_time_));
  }
  last_time_ = timestamp;

  StepResult result;
  if (gated_) {
    for (const auto id : present_) result.records.push_back(records_.at(id));
    return result;
  }

  ungated_.push_back({accrual_base_, timestamp});
  std::set<std::uint64_t> now;
  for (const auto id : active_ids) {
    if (!now.insert(id).second) continue;  // duplicate id in one step
    auto it = records_.find(id);
    if (it == records_.end()) {
      ComplianceRecord rec;
      rec.track_id = id;
      rec.first_seen = rec.last_seen = timestamp;
      rec.presence.push_back({timestamp, timestamp});
      it = records_.emplace(id, std::move(rec)).first;
    } else if (present_.contains(id)) {
      accrue(it->second, ungated_, timestamp, result.changes);
    } else {
      it->second.presence.push_back({timestamp, timestamp});
      it->second.last_seen = timestamp;
    }
    result.records.push_back(it->second);
  }
  present_ = std::move(now);
  ungated_.clear();
  accrual_base_ = timestamp;
  return result;
}

std::vector<ComplianceRecord> ComplianceEngine::report() const {
  std::vector<ComplianceRecord> out;
  out.reserve(records_.size());
  for (const auto& [id, rec] : records_) out.push_back(rec);
  return out;
}

}  // namespace sanitrack
