#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "bats/clock.hpp"
#include "bats/protocol.hpp"

namespace bats::sim {

struct ClockConfig {
  double tick_ns = kSoftwareTimerTickNs;
  double head_tick_ns = -1.0;  // < 0: same as sensors
  double skew_ppm_max = 40.0;  // skew ~ U[-max, +max]
  double offset_max_s = 1.0;   // offset ~ U[0, max)
  DriftModel drift;
};

struct LinkConfig {
  double propagation_ns = 1000.0;
  double jitter_ns = 5000.0;  // half width of the uniform SFD jitter
  double loss = 0.0;          // per-frame Bernoulli loss
  double bitrate_bps = 250000.0;
};

struct NodeSpec {
  int id = 0;
  int level = 0;
  int parent = -1;
  ClockParams params;
};

struct Topology {
  std::vector<NodeSpec> nodes;  // nodes[0] is the head
  ClockConfig clock;
  LinkConfig link;

  int head() const { return 0; }
  int max_level() const;
  std::vector<int> children(int id) const;
  // Throws invalid_config unless the topology is a tree rooted at node 0 with
  // consistent levels.
  void validate() const;
};

// Head plus n sensors in a chain; sensor clocks drawn from `clock` with `seed`.
Topology build_chain(int hops, const ClockConfig& clock, const LinkConfig& link,
                     std::uint64_t seed);

// Static tree: parents[i] is the parent of sensor i + 1 and must be smaller
// than i + 1. Clocks are drawn as for build_chain.
Topology build_tree(const std::vector<int>& parents, const ClockConfig& clock,
                    const LinkConfig& link, std::uint64_t seed);

// ---------------------------------------------------------------------------

enum class EventKind {
  measurement_due,
  report_due,
  transmit,
  arrival,
  beacon_due,
  request_due,
  keepalive_due,
  command_due,
};

struct Event {
  SimTime due;
  std::uint64_t sequence = 0;
  EventKind kind = EventKind::measurement_due;
  int node = 0;
  std::shared_ptr<proto::Message> msg;
  std::uint64_t generation = 0;
  // Arrival only: send SFD time of the frame.
  SimTime sent{};
};

// Min-queue on (due, sequence); sequence numbers are assigned on push.
class EventQueue {
 public:
  std::uint64_t push(Event ev);
  Event pop();
  const Event& top() const { return heap_.top(); }
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.due != b.due) return a.due > b.due;
      return a.sequence > b.sequence;
    }
  };
  std::priority_queue<Event, std::vector<Event>, Later> heap_;
  std::uint64_t next_ = 0;
};

// ---------------------------------------------------------------------------

enum class Outcome { ok, bootstrap, untranslatable, not_estimated, undelivered };
std::string_view to_string(Outcome o);
std::optional<Outcome> outcome_from_string(std::string_view s);

struct MeasurementOutcome {
  std::uint64_t id = 0;
  int origin = 0;
  int level = 0;
  SimTime true_time{};
  Ticks local = 0;
  Outcome outcome = Outcome::undelivered;
  double estimate_s = 0.0;  // valid for ok and bootstrap
  double error_s = 0.0;     // estimate - true time
};

// What the head saw from one upward frame, in arrival order. Replaying these
// frames through a fresh HeadProcessor reproduces the head's estimates.
struct HeadFrame {
  SimTime at{};
  std::vector<proto::HopRecord> pairs;
  std::vector<proto::MeasurementRecord> records;
};

struct TraceEvent {
  SimTime t{};
  int node = 0;
  std::string kind;
};

struct NodeSummary {
  int id = 0;
  int level = 0;
  int parent = -1;
  proto::Role role = proto::Role::leaf;
  ClockParams params;
  double tick_ns = 0.0;
  proto::NodeCounters counters;
};

struct RunConfig {
  Topology topology;
  proto::SchemeConfig scheme;
  double duration_s = 3600.0;
  std::uint64_t seed = 1;
  bool record_events = false;
};

struct RunTrace {
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  double duration_s = 0.0;
  proto::Scheme scheme = proto::Scheme::bats;
  est::Method method = est::Method::lsq;
  std::size_t window = 0;
  std::vector<NodeSummary> nodes;
  std::vector<MeasurementOutcome> measurements;  // ordered by id
  std::vector<HeadFrame> head_frames;
  std::vector<TraceEvent> events;
  std::uint64_t lost_frames = 0;
  std::uint64_t lost_pairs = 0;
  std::uint64_t lost_records = 0;
  std::uint64_t duplicate_pairs = 0;

  double head_tick_ns() const { return nodes.empty() ? 1.0 : nodes.front().tick_ns; }
};

// Measurement event times of a node: phase + k * interval below the horizon,
// at most `cap` of them.
std::vector<SimTime> measurement_schedule(double interval_s, double phase_s,
                                          double duration_s,
                                          std::optional<std::uint64_t> cap);

// Feeds one head frame into the processor: pairs first, then held records
// that became translatable, then the frame's own records.
std::vector<proto::HeadTranslation> process_head_frame(proto::HeadProcessor& head,
                                                       const HeadFrame& frame);

// Applies translations to outcomes (indexed by record id).
void apply_translations(std::vector<MeasurementOutcome>& outcomes,
                        const std::vector<proto::HeadTranslation>& translations,
                        double head_tick_ns);

// Runs the scheme on the topology to the horizon. Throws invalid_config for
// inconsistent configurations before any event executes.
RunTrace run(const RunConfig& cfg);

}  // namespace bats::sim
