#include "bats/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bats/error.hpp"

namespace bats::proto {

std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::bats: return "bats";
    case Scheme::flooding: return "flooding";
    case Scheme::flooding_rsp: return "flooding_rsp";
    case Scheme::conventional_two_way: return "conventional_two_way";
    case Scheme::reverse_two_way: return "reverse_two_way";
  }
  return "?";
}

std::string_view to_string(MessageKind k) {
  switch (k) {
    case MessageKind::beacon: return "beacon";
    case MessageKind::request: return "request";
    case MessageKind::response: return "response";
    case MessageKind::report: return "report";
    case MessageKind::measurement: return "measurement";
    case MessageKind::command: return "command";
  }
  return "?";
}

std::string_view to_string(Role r) {
  switch (r) {
    case Role::head: return "head";
    case Role::gateway: return "gateway";
    case Role::leaf: return "leaf";
  }
  return "?";
}

std::string_view to_string(Bundling b) {
  switch (b) {
    case Bundling::none: return "none";
    case Bundling::self_data: return "self";
    case Bundling::all_data: return "all";
  }
  return "?";
}

std::optional<Scheme> scheme_from_string(std::string_view s) {
  for (Scheme v : {Scheme::bats, Scheme::flooding, Scheme::flooding_rsp,
                   Scheme::conventional_two_way, Scheme::reverse_two_way}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

std::optional<Bundling> bundling_from_string(std::string_view s) {
  for (Bundling v : {Bundling::none, Bundling::self_data, Bundling::all_data}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

std::size_t Message::timestamp_count() const {
  switch (kind) {
    case MessageKind::report: return 2 * hop_records.size() + 1 + response_timestamps;
    case MessageKind::measurement: return response_timestamps;
    case MessageKind::beacon:
    case MessageKind::request:
    case MessageKind::command: return 1;
    case MessageKind::response: return 2;
  }
  return 0;
}

std::size_t Message::size_bytes() const {
  return layout::kHeaderBytes + layout::kRecordBytes * bundle.size() +
         layout::kTimestampBytes * timestamp_count();
}

void SchemeConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorCode::invalid_config, what); };
  if (!(si_s > 0.0)) bad("SI must be positive");
  if (!(measurement_interval_s > 0.0)) bad("measurement interval must be positive");
  if (measurement_phase_s < 0.0) bad("measurement phase must be non-negative");
  if (bundle_size < 1) bad("bundle size must be at least 1");
  if (window == 1) bad("regression window must be 0 (all) or at least 2");
  if (relay_delay_s < 0.0 || level_stagger_s < 0.0) bad("delays must be non-negative");
  if (command_interval_s < 0.0) bad("command interval must be non-negative");
  if (node_precision == NodePrecision::fp32 && scheme != Scheme::flooding_rsp) {
    bad("fp32 node-side arithmetic is modelled for flooding_rsp only");
  }
  if (measurements_per_node && *measurements_per_node == 0) {
    bad("measurements per node must be positive when given");
  }
}

std::size_t default_window(double si_s) {
  if (si_s < 5.0) return 19;
  if (si_s < 50.0) return 5;
  return 2;
}

Ticks sfd_timestamp(SfdEvent, HardwareClock& clock, SimTime t,
                    const JitterModel& jitter, RngStream& rng) {
  std::int64_t j = 0;
  if (jitter.half_width_ns > 0.0) {
    j = std::llround(rng.uniform(-jitter.half_width_ns, jitter.half_width_ns));
  }
  return clock.ticks_at(SimTime{std::max<std::int64_t>(0, t.ns + j)});
}

std::uint64_t NodeCounters::total_tx() const {
  std::uint64_t n = 0;
  for (auto v : tx) n += v;
  return n;
}

std::uint64_t NodeCounters::total_rx() const {
  std::uint64_t n = 0;
  for (auto v : rx) n += v;
  return n;
}

NodeState::NodeState(int id_, Role role_, int level_, int parent_, HardwareClock clock_,
                     const SchemeConfig& cfg)
    : id(id_),
      role(role_),
      level(level_),
      parent(parent_),
      clock(std::move(clock_)),
      bundling(cfg.bundling),
      sync_window(cfg.scheme == Scheme::flooding_rsp ? 2 : cfg.window) {}

// ---------------------------------------------------------------------------

Message bats_on_report_due(NodeState& node, SimTime t) {
  Message m;
  m.kind = MessageKind::report;
  m.src = node.id;
  m.dst = node.parent;
  m.bundle = std::move(node.own_buffer);
  node.own_buffer.clear();
  if (node.bundling == Bundling::all_data) {
    m.bundle.insert(m.bundle.end(), node.forward_buffer.begin(), node.forward_buffer.end());
    m.hop_records = std::move(node.pending_hops);
    node.forward_buffer.clear();
    node.pending_hops.clear();
  }
  m.sender_sync_index = node.next_sync_index++;
  node.last_report = t;
  return m;
}

ReceiveOutcome bats_on_receive(NodeState& parent, const Message& msg, Ticks t2) {
  ReceiveOutcome out;
  const bool known_child =
      std::find(parent.children.begin(), parent.children.end(), msg.src) !=
      parent.children.end();
  if (msg.kind != MessageKind::report || !msg.sender_t1 || !known_child) {
    ++parent.counters.dropped_unknown;
    out.dropped = true;
    return out;
  }
  HopRecord fresh{msg.src, parent.level + 1,
                  est::TimestampPair{*msg.sender_t1, t2, msg.sender_sync_index}};

  if (parent.role == Role::head) {
    out.head_pairs = msg.hop_records;
    out.head_pairs.push_back(fresh);
    out.head_records = msg.bundle;
    return out;
  }
  if (parent.bundling == Bundling::all_data) {
    parent.pending_hops.insert(parent.pending_hops.end(), msg.hop_records.begin(),
                               msg.hop_records.end());
    parent.pending_hops.push_back(fresh);
    parent.forward_buffer.insert(parent.forward_buffer.end(), msg.bundle.begin(),
                                 msg.bundle.end());
    return out;
  }
  Message relay;
  relay.kind = MessageKind::report;
  relay.src = parent.id;
  relay.dst = parent.parent;
  relay.hop_records = msg.hop_records;
  relay.hop_records.push_back(fresh);
  relay.bundle = msg.bundle;
  relay.sender_sync_index = parent.next_sync_index++;
  out.upward = std::move(relay);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::optional<ClockParams> estimate_at_node(const est::RegressionWindow& w,
                                            const FloodConfig& cfg) {
  if (w.size() < 2) return std::nullopt;
  if (cfg.precision == NodePrecision::fp64) {
    return est::estimate(cfg.method, w);
  }
  // Node-side binary32 interpolation over the two most recent beacons.
  const auto& prev = w.pairs()[w.size() - 2];
  const auto& cur = w.pairs().back();
  const double d_child = static_cast<double>(cur.t_child - prev.t_child);
  const double d_parent = static_cast<double>(cur.t_parent - prev.t_parent);
  const double ratio_in[] = {d_child, d_parent};
  const double offset_in[] = {static_cast<double>(prev.t_child),
                              static_cast<double>(cur.t_parent),
                              static_cast<double>(prev.t_parent),
                              static_cast<double>(cur.t_child)};
  const auto a = est::eval32(est::Formula::rsp_ratio, ratio_in, cfg.rounding);
  const auto b = est::eval32(est::Formula::rsp_offset, offset_in, cfg.rounding);
  return ClockParams{static_cast<double>(a), static_cast<double>(b)};
}

}  // namespace

std::optional<double> flooding_estimate(const NodeState& node, Ticks local,
                                        const FloodConfig& cfg) {
  if (!node.local_estimate) return std::nullopt;
  if (cfg.precision == NodePrecision::fp64) {
    return est::rsp_logical(*node.local_estimate, static_cast<double>(local));
  }
  const double in[] = {node.local_estimate->ratio, node.local_estimate->offset,
                       static_cast<double>(local)};
  return static_cast<double>(est::eval32(est::Formula::rsp_logical, in, cfg.rounding));
}

void flooding_stamp_beacon(const NodeState& node, Message& beacon, Ticks t1,
                           const FloodConfig& cfg) {
  if (node.role == Role::head) {
    beacon.beacon_time = t1;
    return;
  }
  if (auto est = flooding_estimate(node, t1, cfg)) {
    beacon.beacon_time = std::llround(*est);
  } else {
    beacon.beacon_time.reset();
  }
}

std::vector<Message> flooding_scheme_step(NodeState& node, const FloodEvent& ev,
                                          const FloodConfig& cfg) {
  std::vector<Message> out;
  auto beacon_from = [&](std::uint64_t generation) {
    Message b;
    b.kind = MessageKind::beacon;
    b.src = node.id;
    b.dst = -1;
    b.generation = generation;
    return b;
  };
  switch (ev.kind) {
    case FloodEventKind::beacon_due:
      if (node.role != Role::head) {
        fail(ErrorCode::contract_violation, "only the head originates beacons");
      }
      out.push_back(beacon_from(ev.generation));
      break;
    case FloodEventKind::beacon_received: {
      if (node.role == Role::head || ev.beacon == nullptr) break;
      if (ev.beacon->generation <= node.last_generation) break;
      node.last_generation = ev.beacon->generation;
      if (ev.beacon->beacon_time) {
        // Reference time regressed on local time: ref = ratio * local + offset.
        const est::TimestampPair pair{*ev.beacon->beacon_time, ev.local,
                                      ev.beacon->generation};
        if (node.sync_window.push(pair)) {
          if (auto p = estimate_at_node(node.sync_window, cfg)) {
            node.local_estimate = p;
            ++node.counters.estimates;
          }
        }
      }
      if (!node.children.empty()) out.push_back(beacon_from(ev.beacon->generation));
      break;
    }
    case FloodEventKind::measurement:
      if (ev.record != nullptr) {
        ev.record->node_estimate = flooding_estimate(node, ev.local, cfg);
      }
      break;
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<Message> twoway_scheme_step(NodeState& node, Scheme scheme,
                                        const TwoWayEvent& ev) {
  std::vector<Message> out;
  auto make = [&](MessageKind kind, int dst) {
    Message m;
    m.kind = kind;
    m.src = node.id;
    m.dst = dst;
    m.generation = ev.generation;
    return m;
  };
  switch (ev.kind) {
    case TwoWayEventKind::request_due:
      if (scheme == Scheme::conventional_two_way && node.role != Role::head) {
        out.push_back(make(MessageKind::request, node.parent));
      }
      break;
    case TwoWayEventKind::beacon_due:
      if (scheme == Scheme::reverse_two_way && node.role == Role::head) {
        out.push_back(make(MessageKind::beacon, -1));
      }
      break;
    case TwoWayEventKind::received: {
      if (ev.msg == nullptr) break;
      const Message& m = *ev.msg;
      if (m.kind == MessageKind::request) {
        out.push_back(make(MessageKind::response, m.src));
      } else if (m.kind == MessageKind::beacon && node.role != Role::head) {
        if (m.generation <= node.last_generation) break;
        node.last_generation = m.generation;
        node.response_pending = true;
        if (!node.children.empty()) {
          Message b = make(MessageKind::beacon, -1);
          b.generation = m.generation;
          out.push_back(std::move(b));
        }
      }
      break;
    }
  }
  return out;
}

Message data_report(NodeState& node, Scheme scheme) {
  Message m;
  m.kind = MessageKind::measurement;
  m.src = node.id;
  m.dst = node.parent;
  m.bundle = std::move(node.own_buffer);
  node.own_buffer.clear();
  if (node.bundling == Bundling::all_data) {
    m.bundle.insert(m.bundle.end(), node.forward_buffer.begin(), node.forward_buffer.end());
    node.forward_buffer.clear();
  }
  if (scheme == Scheme::reverse_two_way && node.response_pending) {
    m.response_timestamps = 2;
    node.response_pending = false;
  }
  return m;
}

std::optional<Message> relay_data(NodeState& gateway, const Message& msg, Scheme) {
  if (gateway.bundling == Bundling::all_data) {
    gateway.forward_buffer.insert(gateway.forward_buffer.end(), msg.bundle.begin(),
                                  msg.bundle.end());
    return std::nullopt;
  }
  Message relay;
  relay.kind = MessageKind::measurement;
  relay.src = gateway.id;
  relay.dst = gateway.parent;
  relay.bundle = msg.bundle;
  relay.response_timestamps = msg.response_timestamps;
  return relay;
}

// ---------------------------------------------------------------------------

HeadProcessor::HeadProcessor(std::map<int, int> parent_of, int head_id,
                             est::Method method, std::size_t window)
    : parent_of_(std::move(parent_of)), head_id_(head_id), estimates_(method, window) {}

bool HeadProcessor::ingest_pair(int node, const est::TimestampPair& pair) {
  return estimates_.ingest(node, pair);
}

std::optional<std::vector<ClockParams>> HeadProcessor::chain(int origin) const {
  std::vector<ClockParams> layers;
  int v = origin;
  while (v != head_id_) {
    auto p = estimates_.params(v);
    auto up = parent_of_.find(v);
    if (!p || up == parent_of_.end()) return std::nullopt;
    layers.push_back(*p);
    v = up->second;
    if (layers.size() > parent_of_.size()) {
      fail(ErrorCode::contract_violation, "cycle in parent map");
    }
  }
  std::reverse(layers.begin(), layers.end());
  return layers;
}

std::optional<HeadTranslation> HeadProcessor::ingest_measurement(
    const MeasurementRecord& r) {
  if (auto layers = chain(r.origin)) {
    return HeadTranslation{r.id,
                           est::multihop_to_head(*layers, static_cast<double>(r.local)),
                           false};
  }
  held_.push_back(r);
  return std::nullopt;
}

std::vector<HeadTranslation> HeadProcessor::release_held() {
  std::vector<HeadTranslation> out;
  std::vector<MeasurementRecord> still;
  for (const auto& r : held_) {
    if (auto layers = chain(r.origin)) {
      out.push_back(HeadTranslation{
          r.id, est::multihop_to_head(*layers, static_cast<double>(r.local)), true});
    } else {
      still.push_back(r);
    }
  }
  held_ = std::move(still);
  return out;
}

}  // namespace bats::proto
