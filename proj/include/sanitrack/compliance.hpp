#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string_view>
#include <vector>

namespace sanitrack {

struct HandEvent {
  double timestamp = 0.0;
  bool present = false;
};

enum class ComplianceStatus { kSanitizing, kReady };

std::string_view to_string(ComplianceStatus status);
/// Display color for renderers: red while sanitizing, green once ready.
std::string_view status_color(ComplianceStatus status);

struct PresenceInterval {
  double start = 0.0;
  double end = 0.0;
};

struct ComplianceRecord {
  std::uint64_t track_id = 0;
  double dwell = 0.0;  // seconds of ungated presence
  ComplianceStatus status = ComplianceStatus::kSanitizing;
  double first_seen = 0.0;
  double last_seen = 0.0;
  std::vector<PresenceInterval> presence;
  std::optional<double> ready_at;  // instant the dwell crossed the requirement
};

struct ComplianceConfig {
  double required_dwell = 10.0;

  void validate() const;
};

struct StatusChange {
  double timestamp = 0.0;
  std::uint64_t track_id = 0;
  ComplianceStatus status = ComplianceStatus::kReady;
};

/// Per-track sanitization dwell accounting. Hand presence gates accrual: while a
/// hand is in view no dwell accrues and the set of present tracks is frozen.
class ComplianceEngine {
 public:
  explicit ComplianceEngine(ComplianceConfig config = {});

  /// Throws OrderingError for an event older than the last processed timestamp.
  /// Repeated presence assertions are idempotent; a release without a prior
  /// assertion is a no-op.
  void on_hand_event(const HandEvent& event);

  struct StepResult {
    std::vector<ComplianceRecord> records;  // one per active track, in input order
    std::vector<StatusChange> changes;
  };

  /// Accrues the ungated time since the previous ungated step to tracks present at
  /// both steps. While gated, returns the frozen records without accruing.
  StepResult step(std::span<const std::uint64_t> active_ids, double timestamp);

  bool gated() const { return gated_; }
  const ComplianceConfig& config() const { return config_; }
  const ComplianceRecord* record(std::uint64_t id) const;

  /// Every record ever created, active or expired, ordered by track id.
  std::vector<ComplianceRecord> report() const;

 private:
  void accrue(ComplianceRecord& rec, std::span<const PresenceInterval> pieces, double until,
              std::vector<StatusChange>& changes);

  ComplianceConfig config_;
  std::map<std::uint64_t, ComplianceRecord> records_;
  std::set<std::uint64_t> present_;  // tracks present at the last ungated step
  double accrual_base_ = 0.0;        // start of the current ungated stretch
  double last_time_ = -1e300;
  bool gated_ = false;
  std::vector<PresenceInterval> ungated_;  // closed ungated stretches since the last ungated step
};

}  // namespace sanitrack
