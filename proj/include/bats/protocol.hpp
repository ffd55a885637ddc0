#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "bats/clock.hpp"
#include "bats/estimators.hpp"
#include "bats/precision.hpp"
#include "bats/rng.hpp"

namespace bats::proto {

enum class Scheme {
  bats,                  // reverse one-way, head-side estimation
  flooding,              // conventional one-way, windowed regression at nodes
  flooding_rsp,          // conventional one-way, two-point interpolation at nodes
  conventional_two_way,  // request/response per SI (message flow only)
  reverse_two_way,       // beacon doubles as request, response rides in reports
};

enum class MessageKind { beacon, request, response, report, measurement, command };
constexpr std::size_t kMessageKinds = 6;

enum class Role { head, gateway, leaf };

enum class Bundling { none, self_data, all_data };

enum class NodePrecision { fp64, fp32 };

std::string_view to_string(Scheme s);
std::string_view to_string(MessageKind k);
std::string_view to_string(Role r);
std::string_view to_string(Bundling b);
std::optional<Scheme> scheme_from_string(std::string_view s);
std::optional<Bundling> bundling_from_string(std::string_view s);

// Byte-level payload layout, used for size and airtime accounting only.
namespace layout {
constexpr std::size_t kKindBytes = 1;
constexpr std::size_t kAddressBytes = 2;
constexpr std::size_t kHeaderBytes = kKindBytes + 2 * kAddressBytes;
constexpr std::size_t kTimestampBytes = 4;
constexpr std::size_t kRecordOriginBytes = 2;
constexpr std::size_t kRecordValueBytes = 2;
constexpr std::size_t kRecordBytes =
    kRecordOriginBytes + kTimestampBytes + kRecordValueBytes;
// 802.15.4 PHY: preamble 4, SFD 1, length 1; plus the 2-byte FCS.
constexpr std::size_t kPhyOverheadBytes = 8;
}  // namespace layout

struct MeasurementRecord {
  int origin = 0;
  Ticks local = 0;           // origin clock at the measurement event
  std::uint16_t value = 0;   // opaque payload
  // Simulator bookkeeping, not part of the payload.
  std::uint64_t id = 0;
  SimTime true_time{};
  // Reference-time estimate in head ticks, for schemes that estimate at nodes.
  std::optional<double> node_estimate;
};

// A completed stamp pair for the link `node` -> parent(node).
struct HopRecord {
  int node = 0;
  int layer = 0;
  est::TimestampPair pair;
};

struct Message {
  MessageKind kind = MessageKind::report;
  int src = 0;
  int dst = 0;
  std::vector<HopRecord> hop_records;
  std::vector<MeasurementRecord> bundle;
  // Sender's SFD stamp and frame counter; carried by upward reports.
  std::optional<Ticks> sender_t1;
  std::uint64_t sender_sync_index = 0;
  // Beacon payload: sender's reference-time estimate at its SFD (head ticks).
  std::optional<Ticks> beacon_time;
  std::uint64_t generation = 0;
  // Response timestamps embedded in a report (reverse two-way).
  std::size_t response_timestamps = 0;
  // Downlink command target, in the destination's clock ticks.
  std::optional<Ticks> command_target;

  std::size_t timestamp_count() const;
  std::size_t size_bytes() const;
};

struct SchemeConfig {
  Scheme scheme = Scheme::bats;
  double si_s = 1.0;
  double measurement_interval_s = 0.2;
  double measurement_phase_s = 0.1;
  std::optional<std::uint64_t> measurements_per_node;  // cap; none = horizon
  std::size_t bundle_size = 5;
  Bundling bundling = Bundling::self_data;
  std::size_t window = 19;  // 0 = every sample
  est::Method method = est::Method::lsq;
  NodePrecision node_precision = NodePrecision::fp64;
  precision::Rounding rounding = precision::Rounding::nearest_even;
  bool keepalive = false;          // timestamp-only reports when an SI passes silently
  double command_interval_s = 0.0; // 0 disables downlink commands
  double relay_delay_s = 0.002;
  double level_stagger_s = 0.02;   // all-data: deeper levels report first
  double beacon_phase_s = -1.0;    // < 0: SI / 2

  // Throws invalid_config.
  void validate() const;
  std::size_t effective_bundle() const {
    return bundling == Bundling::none ? 1 : bundle_size;
  }
};

// Default regression window for a head-side run at the given SI.
std::size_t default_window(double si_s);

struct JitterModel {
  double half_width_ns = 0.0;  // uniform on [-w, +w]
};

enum class SfdEvent { send, receive };

// Clock reading taken by the SFD interrupt of a frame whose SFD passes at t.
// Each call draws its own jitter sample from `rng`.
Ticks sfd_timestamp(SfdEvent event, HardwareClock& clock, SimTime t,
                    const JitterModel& jitter, RngStream& rng);

struct NodeCounters {
  std::array<std::uint64_t, kMessageKinds> tx{};
  std::array<std::uint64_t, kMessageKinds> rx{};
  double tx_airtime_s = 0.0;
  double rx_airtime_s = 0.0;
  std::uint64_t measurements = 0;
  std::uint64_t estimates = 0;  // node-side estimator runs
  std::uint64_t dropped_unknown = 0;

  std::uint64_t total_tx() const;
  std::uint64_t total_rx() const;
};

struct NodeState {
  NodeState(int id, Role role, int level, int parent, HardwareClock clock,
            const SchemeConfig& cfg);

  int id;
  Role role;
  int level;
  int parent;
  std::vector<int> children;
  HardwareClock clock;
  Bundling bundling;

  std::vector<MeasurementRecord> own_buffer;
  std::vector<MeasurementRecord> forward_buffer;
  std::vector<HopRecord> pending_hops;
  std::uint64_t next_sync_index = 1;
  std::optional<SimTime> last_report;

  // Node-side synchronisation state (conventional schemes).
  est::RegressionWindow sync_window;
  std::optional<ClockParams> local_estimate;
  std::uint64_t last_generation = 0;
  bool response_pending = false;

  NodeCounters counters;
};

// ---------------------------------------------------------------------------
// Reverse one-way (BATS) node behaviour.

// Builds the upward report: own measurements, and under all-data bundling the
// buffered offspring records and pairs. The MAC fills in sender_t1 at the SFD.
Message bats_on_report_due(NodeState& node, SimTime t);

struct ReceiveOutcome {
  // Pairs and records reaching the head (head role only).
  std::vector<HopRecord> head_pairs;
  std::vector<MeasurementRecord> head_records;
  // Frame to relay upward now (gateways without all-data bundling).
  std::optional<Message> upward;
  bool dropped = false;
};

// Completes the child's pair with the local receive stamp t2 and routes the
// frame's content: to the head's estimator, into the next upward report, or
// into an immediate relay.
ReceiveOutcome bats_on_receive(NodeState& parent, const Message& msg, Ticks t2);

// ---------------------------------------------------------------------------
// Conventional one-way flooding.

enum class FloodEventKind { beacon_due, beacon_received, measurement };

struct FloodEvent {
  FloodEventKind kind = FloodEventKind::beacon_due;
  std::uint64_t generation = 0;
  const Message* beacon = nullptr;  // beacon_received
  Ticks local = 0;                  // receive stamp or measurement reading
  MeasurementRecord* record = nullptr;
};

struct FloodConfig {
  est::Method method = est::Method::lsq;
  NodePrecision precision = NodePrecision::fp64;
  precision::Rounding rounding = precision::Rounding::nearest_even;
};

// beacon_due (head): emits the generation's beacon. beacon_received: updates
// the node's estimate and emits the rebroadcast when the node has children.
// measurement: stamps the record with the node's reference-time estimate.
std::vector<Message> flooding_scheme_step(NodeState& node, const FloodEvent& ev,
                                          const FloodConfig& cfg);

// Reference-time estimate (head ticks) for a local reading, if synchronised.
std::optional<double> flooding_estimate(const NodeState& node, Ticks local,
                                        const FloodConfig& cfg);

// Fills in the beacon payload from the sender's own SFD stamp.
void flooding_stamp_beacon(const NodeState& node, Message& beacon, Ticks t1,
                           const FloodConfig& cfg);

// ---------------------------------------------------------------------------
// Two-way schemes (message flow only).

enum class TwoWayEventKind { request_due, beacon_due, received };

struct TwoWayEvent {
  TwoWayEventKind kind = TwoWayEventKind::request_due;
  std::uint64_t generation = 0;
  const Message* msg = nullptr;
};

std::vector<Message> twoway_scheme_step(NodeState& node, Scheme scheme,
                                        const TwoWayEvent& ev);

// ---------------------------------------------------------------------------
// Upward data frames of the conventional schemes.

Message data_report(NodeState& node, Scheme scheme);

// Gateway handling of a child's measurement frame: relay now or buffer.
std::optional<Message> relay_data(NodeState& gateway, const Message& msg, Scheme scheme);

// ---------------------------------------------------------------------------
// Head-side translation of measurement timestamps.

struct HeadTranslation {
  std::uint64_t record_id = 0;
  double reference_ticks = 0.0;
  bool bootstrap = false;  // held until the origin's chain became estimable
};

class HeadProcessor {
 public:
  // parent_of maps every sensor id to its parent id; the head is `head_id`.
  HeadProcessor(std::map<int, int> parent_of, int head_id, est::Method method,
                std::size_t window);

  // Returns false for duplicate pairs.
  bool ingest_pair(int node, const est::TimestampPair& pair);

  // Translates the record, or holds it while any link on its path lacks an
  // estimate.
  std::optional<HeadTranslation> ingest_measurement(const MeasurementRecord& r);

  // Translates held records whose chains have become estimable.
  std::vector<HeadTranslation> release_held();

  // Layer parameters from layer 1 down to `origin`; null if any is missing.
  std::optional<std::vector<ClockParams>> chain(int origin) const;

  std::size_t held_count() const { return held_.size(); }
  const std::vector<MeasurementRecord>& held() const { return held_; }
  const est::EstimateSet& estimates() const { return estimates_; }

 private:
  std::map<int, int> parent_of_;
  int head_id_;
  est::EstimateSet estimates_;
  std::vector<MeasurementRecord> held_;
};

}  // namespace bats::proto
