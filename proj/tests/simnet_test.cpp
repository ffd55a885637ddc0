#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "bats/error.hpp"
#include "bats/simnet.hpp"

using namespace bats;
using namespace bats::sim;

namespace {

RunConfig single_hop(double duration_s = 120.0) {
  RunConfig rc;
  rc.topology = build_chain(1, ClockConfig{}, LinkConfig{}, 1);
  rc.duration_s = duration_s;
  return rc;
}

RunConfig noise_free(int hops, proto::Bundling b) {
  ClockConfig clock;
  clock.tick_ns = kFineTickNs;
  LinkConfig link;
  link.jitter_ns = 0.0;
  link.propagation_ns = 0.0;
  RunConfig rc;
  rc.topology = build_chain(hops, clock, link, 21);
  rc.scheme.bundling = b;
  rc.duration_s = 120.0;
  return rc;
}

}  // namespace

TEST(Topology, ChainLevels) {
  const Topology one = build_chain(1, ClockConfig{}, LinkConfig{}, 1);
  ASSERT_EQ(one.nodes.size(), 2u);
  EXPECT_EQ(one.nodes[1].parent, 0);
  const Topology six = build_chain(6, ClockConfig{}, LinkConfig{}, 1);
  EXPECT_EQ(six.max_level(), 6);
  for (int i = 1; i <= 6; ++i) EXPECT_EQ(six.nodes[i].level, i);
  EXPECT_THROW(build_chain(0, ClockConfig{}, LinkConfig{}, 1), Error);
}

TEST(Topology, SameSeedSameClocks) {
  const Topology a = build_chain(4, ClockConfig{}, LinkConfig{}, 77);
  const Topology b = build_chain(4, ClockConfig{}, LinkConfig{}, 77);
  const Topology c = build_chain(4, ClockConfig{}, LinkConfig{}, 78);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(a.nodes[i].params, b.nodes[i].params);
  EXPECT_NE(a.nodes[2].params, c.nodes[2].params);
  for (const auto& n : a.nodes) EXPECT_LE(std::abs(n.params.skew()), 40e-6);
}

TEST(Topology, TreeFromParents) {
  const Topology t = build_tree({0, 1, 1, 3}, ClockConfig{}, LinkConfig{}, 2);
  EXPECT_EQ(t.nodes[4].level, 3);
  EXPECT_EQ(t.children(1), (std::vector<int>{2, 3}));
  EXPECT_THROW(build_tree({0, 3, 1}, ClockConfig{}, LinkConfig{}, 2), Error);
}

TEST(EventQueue, OrdersByTimeThenInsertion) {
  auto ev = [](std::int64_t due, EventKind kind, int node) {
    Event e;
    e.due = SimTime{due};
    e.kind = kind;
    e.node = node;
    return e;
  };
  EventQueue q;
  q.push(ev(20, EventKind::transmit, 1));
  q.push(ev(10, EventKind::arrival, 2));
  q.push(ev(10, EventKind::beacon_due, 3));
  EXPECT_EQ(q.pop().node, 2);
  EXPECT_EQ(q.pop().node, 3);
  EXPECT_EQ(q.pop().node, 1);
  EXPECT_TRUE(q.empty());
}

TEST(MeasurementSchedule, CountsAndCap) {
  EXPECT_EQ(measurement_schedule(2.0, 0.0, 60.0, std::nullopt).size(), 30u);
  EXPECT_EQ(measurement_schedule(2.0, 1.0, 60.0, std::nullopt).size(), 30u);
  EXPECT_EQ(measurement_schedule(2.0, 0.0, 60.0, 7).size(), 7u);
  const auto s = measurement_schedule(36.0, 18.0, 3600.0, std::nullopt);
  EXPECT_EQ(s.size(), 100u);
  EXPECT_EQ(s.front(), SimTime::from_seconds(18.0));
}

TEST(Run, ReportsEveryBundleInterval) {
  RunConfig rc = single_hop(600.0);
  rc.scheme.measurement_interval_s = 2.0;
  rc.scheme.measurement_phase_s = 1.0;
  rc.scheme.bundle_size = 5;
  const RunTrace t = run(rc);
  EXPECT_EQ(t.nodes[1].counters.measurements, 300u);
  EXPECT_EQ(t.nodes[1].counters.total_tx(), 60u);  // one report per 10 s
  EXPECT_EQ(t.head_frames.size(), 60u);
}

TEST(Run, BatsSensorHearsNothing) {
  RunConfig rc = single_hop(3600.0);
  rc.scheme.bundling = proto::Bundling::none;
  rc.scheme.measurement_interval_s = 36.0;
  rc.scheme.measurement_phase_s = 18.0;
  const RunTrace t = run(rc);
  EXPECT_EQ(t.nodes[1].counters.total_tx(), 100u);
  EXPECT_EQ(t.nodes[1].counters.total_rx(), 0u);
}

TEST(Run, RejectsBadConfigBeforeStarting) {
  RunConfig rc = single_hop();
  rc.scheme.bundle_size = 0;
  try {
    run(rc);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_config);
  }
  rc = single_hop();
  rc.duration_s = 0.0;
  EXPECT_THROW(run(rc), Error);
}

TEST(Run, IdenticalSeedsGiveIdenticalTraces) {
  RunConfig rc = single_hop(60.0);
  rc.topology.clock.drift.kind = DriftKind::random_walk;
  rc.topology.clock.drift.walk_sigma_ppm = 0.05;
  rc.topology.link.loss = 0.1;
  rc.record_events = true;
  const RunTrace a = run(rc), b = run(rc);
  ASSERT_EQ(a.measurements.size(), b.measurements.size());
  for (std::size_t i = 0; i < a.measurements.size(); ++i) {
    EXPECT_EQ(a.measurements[i].error_s, b.measurements[i].error_s);
    EXPECT_EQ(a.measurements[i].outcome, b.measurements[i].outcome);
  }
  ASSERT_EQ(a.events.size(), b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i) EXPECT_EQ(a.events[i].kind, b.events[i].kind);
  EXPECT_EQ(a.lost_frames, b.lost_frames);
  EXPECT_GT(a.lost_frames, 0u);
}

TEST(Run, NoiseFreeConstantSkewIsExact) {
  for (auto b : {proto::Bundling::self_data, proto::Bundling::all_data}) {
    const RunTrace t = run(noise_free(3, b));
    std::size_t ok = 0;
    for (const auto& m : t.measurements) {
      if (m.outcome != Outcome::ok) continue;
      ++ok;
      EXPECT_LT(std::abs(m.error_s), 1e-9);
    }
    EXPECT_GT(ok, 1000u);
  }
}

TEST(Run, ConservesMeasurements) {
  RunConfig rc = single_hop(300.0);
  rc.topology = build_chain(4, ClockConfig{}, LinkConfig{}, 3);
  rc.topology.link.loss = 0.05;
  const RunTrace t = run(rc);
  std::map<Outcome, std::size_t> by;
  for (const auto& m : t.measurements) ++by[m.outcome];
  std::uint64_t made = 0;
  for (const auto& n : t.nodes) made += n.counters.measurements;
  EXPECT_EQ(t.measurements.size(), made);
  EXPECT_GT(by[Outcome::undelivered], 0u);
  EXPECT_GT(by[Outcome::ok], 0u);
  std::set<std::uint64_t> ids;
  for (const auto& m : t.measurements) ids.insert(m.id);
  EXPECT_EQ(ids.size(), t.measurements.size());
}

TEST(Run, HeadFramesReplayToSameOutcomes) {
  RunConfig rc = single_hop(120.0);
  rc.topology = build_chain(3, ClockConfig{}, LinkConfig{}, 8);
  const RunTrace t = run(rc);
  std::map<int, int> parent_of;
  for (const auto& n : t.nodes) {
    if (n.parent >= 0) parent_of[n.id] = n.parent;
  }
  proto::HeadProcessor head(parent_of, 0, t.method, t.window);
  std::vector<MeasurementOutcome> outcomes = t.measurements;
  for (auto& m : outcomes) {
    m.outcome = Outcome::undelivered;
  }
  for (const auto& f : t.head_frames) {
    for (const auto& r : f.records) outcomes[r.id].outcome = Outcome::untranslatable;
    apply_translations(outcomes, process_head_frame(head, f), t.head_tick_ns());
  }
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    EXPECT_EQ(outcomes[i].outcome, t.measurements[i].outcome);
    EXPECT_EQ(outcomes[i].error_s, t.measurements[i].error_s);
  }
}

TEST(Run, FloodingEstimatesAtNodes) {
  RunConfig rc = single_hop(120.0);
  rc.topology = build_chain(2, ClockConfig{}, LinkConfig{}, 4);
  rc.scheme.scheme = proto::Scheme::flooding;
  rc.scheme.window = 8;
  const RunTrace t = run(rc);
  std::size_t ok = 0;
  for (const auto& m : t.measurements) ok += m.outcome == Outcome::ok;
  EXPECT_GT(ok, 0u);
  EXPECT_GT(t.nodes[1].counters.tx[static_cast<int>(proto::MessageKind::beacon)], 0u);
}

TEST(Run, TwoWaySchemesAreCountingOnly) {
  RunConfig rc = single_hop(60.0);
  rc.scheme.scheme = proto::Scheme::conventional_two_way;
  const RunTrace t = run(rc);
  for (const auto& m : t.measurements) EXPECT_EQ(m.outcome, Outcome::not_estimated);
}

TEST(Outcome, NamesRoundTrip) {
  for (Outcome o : {Outcome::ok, Outcome::bootstrap, Outcome::untranslatable,
                    Outcome::not_estimated, Outcome::undelivered}) {
    EXPECT_EQ(outcome_from_string(to_string(o)), o);
  }
}
