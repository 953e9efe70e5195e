#include <gtest/gtest.h>

#include <random>

#include "sanitrack/compliance.hpp"
#include "sanitrack/types.hpp"

using namespace sanitrack;

namespace {

std::vector<std::uint64_t> ids(std::initializer_list<std::uint64_t> l) { return l; }

}  // namespace

TEST(Compliance, ContinuousPresenceReadyAtRequirement) {
  ComplianceEngine engine({15.0});
  std::vector<StatusChange> changes;
  for (int i = 0; i <= 600; ++i) {
    const double t = 100.0 + i / 30.0;
    auto r = engine.step(ids({7}), t);
    changes.insert(changes.end(), r.changes.begin(), r.changes.end());
  }
  const auto* rec = engine.record(7);
  ASSERT_NE(rec, nullptr);
  EXPECT_EQ(rec->status, ComplianceStatus::kReady);
  ASSERT_TRUE(rec->ready_at.has_value());
  EXPECT_NEAR(*rec->ready_at, 115.0, 1e-9);
  EXPECT_NEAR(rec->dwell, 20.0, 1e-9);
  ASSERT_EQ(changes.size(), 1u);
  EXPECT_EQ(changes[0].track_id, 7u);
  EXPECT_EQ(changes[0].status, ComplianceStatus::kReady);
}

TEST(Compliance, GatedIntervalExcluded) {
  ComplianceEngine engine({15.0});
  for (int t = 0; t <= 10; ++t) engine.step(ids({1}), t);
  engine.on_hand_event({10.0, true});
  for (int t = 11; t < 15; ++t) engine.step(ids({}), t);
  engine.on_hand_event({15.0, false});
  for (int t = 15; t <= 21; ++t) engine.step(ids({1}), t);
  const auto* rec = engine.record(1);
  ASSERT_NE(rec, nullptr);
  EXPECT_NEAR(rec->dwell, 16.0, 1e-9);
  ASSERT_TRUE(rec->ready_at.has_value());
  EXPECT_NEAR(*rec->ready_at, 20.0, 1e-9);
  EXPECT_NEAR(rec->dwell + 5.0, rec->last_seen - rec->first_seen, 1e-9);
}

TEST(Compliance, NoDwellWhileGated) {
  ComplianceEngine engine;
  engine.step(ids({1}), 0.0);
  engine.step(ids({1}), 1.0);
  engine.on_hand_event({1.0, true});
  for (int t = 2; t < 50; ++t) engine.step(ids({1}), t);
  EXPECT_NEAR(engine.record(1)->dwell, 1.0, 1e-12);
  EXPECT_TRUE(engine.gated());
}

TEST(Compliance, HandEventIdempotence) {
  ComplianceEngine engine;
  engine.on_hand_event({0.0, false});
  EXPECT_FALSE(engine.gated());
  engine.on_hand_event({1.0, true});
  engine.on_hand_event({2.0, true});
  EXPECT_TRUE(engine.gated());
  engine.on_hand_event({3.0, false});
  EXPECT_FALSE(engine.gated());
}

TEST(Compliance, OutOfOrderEventRejected) {
  ComplianceEngine engine;
  engine.step(ids({1}), 5.0);
  EXPECT_THROW(engine.on_hand_event({4.0, true}), OrderingError);
  EXPECT_THROW(engine.step(ids({1}), 4.0), OrderingError);
}

TEST(Compliance, NewTrackStartsSanitizing) {
  ComplianceEngine engine;
  const auto r = engine.step(ids({3}), 1.0);
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.records[0].status, ComplianceStatus::kSanitizing);
  EXPECT_EQ(r.records[0].dwell, 0.0);
  EXPECT_EQ(to_string(ComplianceStatus::kSanitizing), "SANITIZING");
  EXPECT_EQ(status_color(ComplianceStatus::kSanitizing), "red");
  EXPECT_EQ(status_color(ComplianceStatus::kReady), "green");
}

TEST(Compliance, Report) {
  ComplianceEngine empty;
  EXPECT_TRUE(empty.report().empty());

  ComplianceEngine engine({2.0});
  for (int i = 0; i <= 30; ++i) engine.step(ids({4}), i * 0.1);
  auto report = engine.report();
  ASSERT_EQ(report.size(), 1u);
  EXPECT_EQ(report[0].status, ComplianceStatus::kReady);
  EXPECT_GE(report[0].dwell, 2.0);

  for (int i = 31; i <= 40; ++i) engine.step(ids({5}), i * 0.1);
  report = engine.report();
  ASSERT_EQ(report.size(), 2u);
  EXPECT_EQ(report[0].track_id, 4u);
  EXPECT_EQ(report[1].track_id, 5u);
}

TEST(Compliance, PresenceIntervalsAcrossAbsence) {
  ComplianceEngine engine;
  engine.step(ids({1}), 0.0);
  engine.step(ids({1}), 1.0);
  engine.step(ids({}), 2.0);
  engine.step(ids({1}), 3.0);
  engine.step(ids({1}), 4.5);
  const auto* rec = engine.record(1);
  ASSERT_EQ(rec->presence.size(), 2u);
  EXPECT_EQ(rec->presence[0].end, 1.0);
  EXPECT_EQ(rec->presence[1].start, 3.0);
  EXPECT_NEAR(rec->dwell, 2.5, 1e-12);
}

TEST(Compliance, RandomSchedulesExactArithmetic) {
  std::mt19937_64 rng(71);
  std::uniform_real_distribution<double> dt(0.01, 0.5);
  std::bernoulli_distribution toggle(0.05);
  for (int trial = 0; trial < 200; ++trial) {
    ComplianceEngine engine({3.0});
    double t = 0.0;
    double gated_total = 0.0;
    double gate_start = 0.0;
    bool gated = false;
    ComplianceStatus last = ComplianceStatus::kSanitizing;
    double last_dwell = 0.0;
    const int steps = 200;
    for (int i = 0; i < steps; ++i) {
      if (i > 0 && i < steps - 1 && toggle(rng)) {
        const double et = t + dt(rng) / 2;
        engine.on_hand_event({et, !gated});
        if (!gated) {
          gate_start = et;
        } else {
          gated_total += et - gate_start;
        }
        gated = !gated;
        t = et;
      }
      t += dt(rng);
      if (i == steps - 1 && gated) {
        engine.on_hand_event({t, false});
        gated_total += t - gate_start;
        gated = false;
        t += dt(rng);
      }
      engine.step(ids({9}), t);
      const auto* rec = engine.record(9);
      ASSERT_GE(rec->dwell, last_dwell);
      if (last == ComplianceStatus::kReady) ASSERT_EQ(rec->status, ComplianceStatus::kReady);
      ASSERT_EQ(rec->status == ComplianceStatus::kReady, rec->dwell >= 3.0);
      last = rec->status;
      last_dwell = rec->dwell;
    }
    const auto* rec = engine.record(9);
    EXPECT_NEAR(rec->dwell + gated_total, rec->last_seen - rec->first_seen, 1e-9);
    EXPECT_LE(rec->dwell, rec->last_seen - rec->first_seen + 1e-12);
  }
}

TEST(Compliance, ZeroHandEventsDwellEqualsWallClock) {
  ComplianceEngine engine;
  for (int i = 0; i < 100; ++i) engine.step(ids({1, 2}), 3.0 + i * 0.0333);
  for (const auto& r : engine.report()) EXPECT_NEAR(r.dwell, r.last_seen - r.first_seen, 1e-12);
}

TEST(Compliance, ConfigValidation) {
  EXPECT_THROW(ComplianceEngine({0.0}), ParameterError);
  EXPECT_THROW(ComplianceEngine({-1.0}), ParameterError);
}
