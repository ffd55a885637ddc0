#include "bats/simnet.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "bats/error.hpp"

namespace bats::sim {

int Topology::max_level() const {
  int m = 0;
  for (const auto& n : nodes) m = std::max(m, n.level);
  return m;
}

std::vector<int> Topology::children(int id) const {
  std::vector<int> out;
  for (const auto& n : nodes) {
    if (n.parent == id && n.id != id) out.push_back(n.id);
  }
  return out;
}

void Topology::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorCode::invalid_config, what); };
  if (nodes.size() < 2) bad("topology needs a head and at least one sensor");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const NodeSpec& n = nodes[i];
    if (n.id != static_cast<int>(i)) bad("node ids must be 0..N-1 in order");
    if (i == 0) {
      if (n.level != 0 || n.parent != -1) bad("node 0 must be the level-0 head");
      continue;
    }
    if (n.parent < 0 || n.parent >= static_cast<int>(nodes.size()) ||
        n.parent == n.id) {
      bad("node " + std::to_string(n.id) + " has no valid parent");
    }
    if (nodes[n.parent].level != n.level - 1) {
      bad("node " + std::to_string(n.id) + " is not one level below its parent");
    }
    if (!(n.params.ratio > 0.0)) bad("clock ratio must be positive");
  }
  if (!(clock.tick_ns > 0.0)) bad("tick must be positive");
  if (clock.skew_ppm_max < 0.0 || clock.offset_max_s < 0.0) {
    bad("clock spread must be non-negative");
  }
  if (link.propagation_ns < 0.0 || link.jitter_ns < 0.0) {
    bad("link delays must be non-negative");
  }
  if (link.loss < 0.0 || link.loss >= 1.0) bad("loss must lie in [0, 1)");
  if (!(link.bitrate_bps > 0.0)) bad("bitrate must be positive");
}

Topology build_tree(const std::vector<int>& parents, const ClockConfig& clock,
                    const LinkConfig& link, std::uint64_t seed) {
  if (parents.empty()) fail(ErrorCode::invalid_config, "a tree needs at least one sensor");
  if (clock.skew_ppm_max > clock.drift.bound_ppm) {
    fail(ErrorCode::invalid_config, "skew spread exceeds the clock bound");
  }
  Topology topo;
  topo.clock = clock;
  topo.link = link;
  topo.nodes.push_back(NodeSpec{0, 0, -1, ClockParams{1.0, 0.0}});
  RngStream rng(derive_seed(seed, 0x746f706fULL));
  for (std::size_t i = 0; i < parents.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    const int p = parents[i];
    if (p < 0 || p >= id) {
      fail(ErrorCode::invalid_config,
           "parent of node " + std::to_string(id) + " must be an earlier node");
    }
    const double skew = rng.uniform(-clock.skew_ppm_max, clock.skew_ppm_max) * 1e-6;
    const double offset = rng.uniform(0.0, clock.offset_max_s) * 1e9;
    topo.nodes.push_back(
        NodeSpec{id, topo.nodes[p].level + 1, p, ClockParams{1.0 + skew, offset}});
  }
  return topo;
}

Topology build_chain(int hops, const ClockConfig& clock, const LinkConfig& link,
                     std::uint64_t seed) {
  if (hops < 1) fail(ErrorCode::invalid_config, "a chain needs at least one hop");
  std::vector<int> parents;
  for (int j = 1; j <= hops; ++j) parents.push_back(j - 1);
  return build_tree(parents, clock, link, seed);
}

// ---------------------------------------------------------------------------

std::uint64_t EventQueue::push(Event ev) {
  ev.sequence = next_++;
  heap_.push(std::move(ev));
  return ev.sequence;
}

Event EventQueue::pop() {
  Event ev = heap_.top();
  heap_.pop();
  return ev;
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::ok: return "ok";
    case Outcome::bootstrap: return "bootstrap";
    case Outcome::untranslatable: return "untranslatable";
    case Outcome::not_estimated: return "not_estimated";
    case Outcome::undelivered: return "undelivered";
  }
  return "?";
}

std::optional<Outcome> outcome_from_string(std::string_view s) {
  for (Outcome o : {Outcome::ok, Outcome::bootstrap, Outcome::untranslatable,
                    Outcome::not_estimated, Outcome::undelivered}) {
    if (to_string(o) == s) return o;
  }
  return std::nullopt;
}

std::vector<SimTime> measurement_schedule(double interval_s, double phase_s,
                                          double duration_s,
                                          std::optional<std::uint64_t> cap) {
  if (!(interval_s > 0.0)) {
    fail(ErrorCode::invalid_config, "measurement interval must be positive");
  }
  const std::int64_t step = SimTime::from_seconds(interval_s).ns;
  const std::int64_t horizon = SimTime::from_seconds(duration_s).ns;
  std::vector<SimTime> out;
  for (std::int64_t t = SimTime::from_seconds(phase_s).ns; t < horizon; t += step) {
    if (cap && out.size() >= *cap) break;
    out.push_back(SimTime{t});
  }
  return out;
}

std::vector<proto::HeadTranslation> process_head_frame(proto::HeadProcessor& head,
                                                       const HeadFrame& frame) {
  for (const auto& h : frame.pairs) head.ingest_pair(h.node, h.pair);
  auto out = head.release_held();
  for (const auto& r : frame.records) {
    if (auto tr = head.ingest_measurement(r)) out.push_back(*tr);
  }
  return out;
}

void apply_translations(std::vector<MeasurementOutcome>& outcomes,
                        const std::vector<proto::HeadTranslation>& translations,
                        double head_tick_ns) {
  for (const auto& tr : translations) {
    if (tr.record_id >= outcomes.size()) {
      fail(ErrorCode::contract_violation, "translation for an unknown record");
    }
    MeasurementOutcome& m = outcomes[tr.record_id];
    const double est_ns = tr.reference_ticks * head_tick_ns;
    m.outcome = tr.bootstrap ? Outcome::bootstrap : Outcome::ok;
    m.estimate_s = est_ns * 1e-9;
    m.error_s = (est_ns - static_cast<double>(m.true_time.ns)) * 1e-9;
  }
}

// ---------------------------------------------------------------------------

namespace {

using proto::Message;
using proto::MessageKind;
using proto::NodeState;
using proto::Role;
using proto::Scheme;

std::map<int, int> parent_map(const Topology& topo) {
  std::map<int, int> m;
  for (const auto& n : topo.nodes) {
    if (n.id != topo.head()) m[n.id] = n.parent;
  }
  return m;
}

class Engine {
 public:
  explicit Engine(const RunConfig& cfg)
      : cfg_(cfg),
        sc_(cfg.scheme),
        horizon_(SimTime::from_seconds(cfg.duration_s)),
        head_(parent_map(cfg.topology), cfg.topology.head(), cfg.scheme.method,
              cfg.scheme.window),
        flood_{cfg.scheme.method, cfg.scheme.node_precision, cfg.scheme.rounding},
        jitter_{cfg.topology.link.jitter_ns} {
    const Topology& topo = cfg.topology;
    for (const auto& spec : topo.nodes) {
      const bool is_head = spec.id == topo.head();
      const double tick = is_head && topo.clock.head_tick_ns > 0.0
                              ? topo.clock.head_tick_ns
                              : topo.clock.tick_ns;
      const DriftModel drift = is_head ? DriftModel{} : topo.clock.drift;
      HardwareClock clock(spec.params, drift, tick, derive_seed(cfg.seed, spec.id, 1));
      auto kids = topo.children(spec.id);
      const Role role = is_head ? Role::head : (kids.empty() ? Role::leaf : Role::gateway);
      nodes_.emplace_back(spec.id, role, spec.level, spec.parent, std::move(clock), sc_);
      nodes_.back().children = std::move(kids);
      jitter_rng_.emplace_back(derive_seed(cfg.seed, spec.id, 2));
      loss_rng_.emplace_back(derive_seed(cfg.seed, spec.id, 3));
      schedules_.push_back({});
      next_measurement_.push_back(0);
    }
  }

  RunTrace run() {
    trace_.seed = cfg_.seed;
    trace_.duration_s = cfg_.duration_s;
    trace_.scheme = sc_.scheme;
    trace_.method = sc_.method;
    trace_.window = sc_.window;
    schedule_initial();
    while (!q_.empty() && q_.top().due < horizon_) dispatch(q_.pop());
    finish();
    return std::move(trace_);
  }

 private:
  double beacon_phase_s() const {
    return sc_.beacon_phase_s < 0.0 ? sc_.si_s / 2.0 : sc_.beacon_phase_s;
  }

  void schedule_initial() {
    const int max_level = cfg_.topology.max_level();
    for (auto& n : nodes_) {
      if (n.role == Role::head) continue;
      double phase = sc_.measurement_phase_s;
      if (sc_.bundling == proto::Bundling::all_data) {
        phase += (max_level - n.level) * sc_.level_stagger_s;
      }
      schedules_[n.id] = measurement_schedule(sc_.measurement_interval_s, phase,
                                              cfg_.duration_s, sc_.measurements_per_node);
      schedule_next_measurement(n.id);
    }
    const std::int64_t si_ns = SimTime::from_seconds(sc_.si_s).ns;
    const SimTime first_beacon = SimTime::from_seconds(beacon_phase_s());
    switch (sc_.scheme) {
      case Scheme::flooding:
      case Scheme::flooding_rsp:
      case Scheme::reverse_two_way:
        push(first_beacon, EventKind::beacon_due, cfg_.topology.head(), nullptr, 1);
        break;
      case Scheme::conventional_two_way:
        for (auto& n : nodes_) {
          if (n.role != Role::head) push(first_beacon, EventKind::request_due, n.id, nullptr, 1);
        }
        break;
      case Scheme::bats:
        if (sc_.keepalive) {
          for (auto& n : nodes_) {
            if (n.role != Role::head) {
              push(SimTime{si_ns}, EventKind::keepalive_due, n.id, nullptr, 0);
            }
          }
        }
        if (sc_.command_interval_s > 0.0) {
          push(SimTime::from_seconds(sc_.command_interval_s), EventKind::command_due,
               cfg_.topology.head(), nullptr, 1);
        }
        break;
    }
  }

  void push(SimTime due, EventKind kind, int node, std::shared_ptr<Message> msg,
            std::uint64_t generation, SimTime sent = {}) {
    Event ev;
    ev.due = due;
    ev.kind = kind;
    ev.node = node;
    ev.msg = std::move(msg);
    ev.generation = generation;
    ev.sent = sent;
    q_.push(std::move(ev));
  }

  void log(SimTime t, int node, std::string kind) {
    if (cfg_.record_events) trace_.events.push_back(TraceEvent{t, node, std::move(kind)});
  }

  void schedule_next_measurement(int id) {
    auto& idx = next_measurement_[id];
    if (idx < schedules_[id].size()) {
      push(schedules_[id][idx], EventKind::measurement_due, id, nullptr, 0);
      ++idx;
    }
  }

  double airtime_s(const Message& m) const {
    return static_cast<double>(m.size_bytes() + proto::layout::kPhyOverheadBytes) * 8.0 /
           cfg_.topology.link.bitrate_bps;
  }

  void dispatch(const Event& ev) {
    switch (ev.kind) {
      case EventKind::measurement_due: on_measurement(ev); break;
      case EventKind::report_due: on_report_due(ev.node, ev.due); break;
      case EventKind::transmit: transmit(ev.node, *ev.msg, ev.due); break;
      case EventKind::arrival: on_arrival(ev); break;
      case EventKind::beacon_due: on_beacon_due(ev); break;
      case EventKind::request_due: on_request_due(ev); break;
      case EventKind::keepalive_due: on_keepalive(ev); break;
      case EventKind::command_due: on_command_due(ev); break;
    }
  }

  void on_measurement(const Event& ev) {
    NodeState& n = nodes_[ev.node];
    proto::MeasurementRecord rec;
    rec.origin = n.id;
    rec.local = n.clock.read(ev.due);
    rec.id = trace_.measurements.size();
    rec.value = static_cast<std::uint16_t>(rec.id & 0xffff);
    rec.true_time = ev.due;
    MeasurementOutcome out;
    out.id = rec.id;
    out.origin = n.id;
    out.level = n.level;
    out.true_time = ev.due;
    out.local = rec.local;
    trace_.measurements.push_back(out);
    ++n.counters.measurements;
    log(ev.due, n.id, "measure");

    if (sc_.scheme == Scheme::flooding || sc_.scheme == Scheme::flooding_rsp) {
      proto::FloodEvent fe;
      fe.kind = proto::FloodEventKind::measurement;
      fe.local = rec.local;
      fe.record = &rec;
      proto::flooding_scheme_step(n, fe, flood_);
    }
    n.own_buffer.push_back(rec);
    if (n.own_buffer.size() >= sc_.effective_bundle()) on_report_due(n.id, ev.due);
    schedule_next_measurement(n.id);
  }

  void on_report_due(int id, SimTime t) {
    NodeState& n = nodes_[id];
    if (sc_.scheme == Scheme::bats) {
      transmit(id, proto::bats_on_report_due(n, t), t);
    } else {
      transmit(id, proto::data_report(n, sc_.scheme), t);
    }
  }

  void on_keepalive(const Event& ev) {
    NodeState& n = nodes_[ev.node];
    const std::int64_t si_ns = SimTime::from_seconds(sc_.si_s).ns;
    if (!n.last_report || ev.due - *n.last_report >= si_ns) on_report_due(n.id, ev.due);
    push(ev.due + si_ns, EventKind::keepalive_due, n.id, nullptr, 0);
  }

  void on_beacon_due(const Event& ev) {
    NodeState& head = nodes_[ev.node];
    std::vector<Message> out;
    if (sc_.scheme == Scheme::reverse_two_way) {
      proto::TwoWayEvent te;
      te.kind = proto::TwoWayEventKind::beacon_due;
      te.generation = ev.generation;
      out = proto::twoway_scheme_step(head, sc_.scheme, te);
    } else {
      proto::FloodEvent fe;
      fe.kind = proto::FloodEventKind::beacon_due;
      fe.generation = ev.generation;
      out = proto::flooding_scheme_step(head, fe, flood_);
    }
    for (auto& m : out) transmit(head.id, m, ev.due);
    push(ev.due + SimTime::from_seconds(sc_.si_s).ns, EventKind::beacon_due, head.id,
         nullptr, ev.generation + 1);
  }

  void on_request_due(const Event& ev) {
    NodeState& n = nodes_[ev.node];
    proto::TwoWayEvent te;
    te.kind = proto::TwoWayEventKind::request_due;
    te.generation = ev.generation;
    for (auto& m : proto::twoway_scheme_step(n, sc_.scheme, te)) transmit(n.id, m, ev.due);
    push(ev.due + SimTime::from_seconds(sc_.si_s).ns, EventKind::request_due, n.id,
         nullptr, ev.generation + 1);
  }

  // Next hop from `from` towards a node in its subtree.
  int next_hop_down(int from, int target) const {
    int v = target;
    while (v >= 0 && nodes_[v].parent != from) v = nodes_[v].parent;
    return v;
  }

  void on_command_due(const Event& ev) {
    NodeState& head = nodes_[ev.node];
    const int sensors = static_cast<int>(nodes_.size()) - 1;
    const int target = 1 + static_cast<int>((ev.generation - 1) % sensors);
    Message cmd;
    cmd.kind = MessageKind::command;
    cmd.src = head.id;
    cmd.dst = next_hop_down(head.id, target);
    cmd.generation = ev.generation;
    if (auto layers = head_.chain(target)) {
      // Issue time one second ahead, translated into the target's clock.
      const double ref = static_cast<double>(head.clock.ticks_at(ev.due)) +
                         1e9 / head.clock.tick_ns();
      cmd.command_target = std::llround(est::multihop_from_head(*layers, ref));
    }
    command_dest_[ev.generation] = target;
    if (cmd.dst >= 0) transmit(head.id, cmd, ev.due);
    push(ev.due + SimTime::from_seconds(sc_.command_interval_s).ns, EventKind::command_due,
         head.id, nullptr, ev.generation + 1);
  }

  void transmit(int src, Message msg, SimTime t) {
    NodeState& n = nodes_[src];
    n.counters.tx[static_cast<std::size_t>(msg.kind)] += 1;
    const Ticks t1 = proto::sfd_timestamp(proto::SfdEvent::send, n.clock, t, jitter_,
                                          jitter_rng_[src]);
    if (sc_.scheme == Scheme::bats && msg.kind == MessageKind::report) msg.sender_t1 = t1;
    if (msg.kind == MessageKind::beacon &&
        (sc_.scheme == Scheme::flooding || sc_.scheme == Scheme::flooding_rsp)) {
      proto::flooding_stamp_beacon(n, msg, t1, flood_);
    }
    const double air = airtime_s(msg);
    n.counters.tx_airtime_s += air;
    log(t, src, "tx:" + std::string(proto::to_string(msg.kind)));

    std::vector<int> to;
    if (msg.dst >= 0) {
      to.push_back(msg.dst);
    } else {
      to = n.children;
    }
    auto shared = std::make_shared<Message>(std::move(msg));
    const auto prop = static_cast<std::int64_t>(std::llround(cfg_.topology.link.propagation_ns));
    const auto air_ns = static_cast<std::int64_t>(std::llround(air * 1e9));
    for (int r : to) {
      if (loss_rng_[src].bernoulli(cfg_.topology.link.loss)) {
        ++trace_.lost_frames;
        if (shared->kind == MessageKind::report) {
          trace_.lost_pairs += shared->hop_records.size() + 1;
        }
        trace_.lost_records += shared->bundle.size();
        log(t, r, "lost:" + std::string(proto::to_string(shared->kind)));
        continue;
      }
      push(t + prop + air_ns, EventKind::arrival, r, shared, 0, t);
    }
  }

  Ticks receive_stamp(NodeState& r, const Event& ev) {
    const auto prop = static_cast<std::int64_t>(std::llround(cfg_.topology.link.propagation_ns));
    return proto::sfd_timestamp(proto::SfdEvent::receive, r.clock, ev.sent + prop, jitter_,
                                jitter_rng_[r.id]);
  }

  void relay(int id, Message m, SimTime now) {
    push(now + SimTime::from_seconds(sc_.relay_delay_s).ns, EventKind::transmit, id,
         std::make_shared<Message>(std::move(m)), 0);
  }

  void on_arrival(const Event& ev) {
    NodeState& r = nodes_[ev.node];
    const Message& m = *ev.msg;
    r.counters.rx[static_cast<std::size_t>(m.kind)] += 1;
    r.counters.rx_airtime_s += airtime_s(m);
    log(ev.due, r.id, "rx:" + std::string(proto::to_string(m.kind)));

    switch (m.kind) {
      case MessageKind::report: {
        const Ticks t2 = receive_stamp(r, ev);
        auto out = proto::bats_on_receive(r, m, t2);
        if (out.dropped) return;
        if (r.role == Role::head) {
          HeadFrame frame{ev.due, std::move(out.head_pairs), std::move(out.head_records)};
          deliver_bats(frame);
          trace_.head_frames.push_back(std::move(frame));
        } else if (out.upward) {
          relay(r.id, std::move(*out.upward), ev.due);
        }
        return;
      }
      case MessageKind::measurement:
        if (r.role == Role::head) {
          deliver_data(m);
        } else if (auto up = proto::relay_data(r, m, sc_.scheme)) {
          relay(r.id, std::move(*up), ev.due);
        }
        return;
      case MessageKind::beacon:
        if (sc_.scheme == Scheme::reverse_two_way) {
          twoway_received(r, ev);
        } else {
          proto::FloodEvent fe;
          fe.kind = proto::FloodEventKind::beacon_received;
          fe.beacon = &m;
          fe.local = receive_stamp(r, ev);
          for (auto& b : proto::flooding_scheme_step(r, fe, flood_)) relay(r.id, b, ev.due);
        }
        return;
      case MessageKind::request:
      case MessageKind::response:
        twoway_received(r, ev);
        return;
      case MessageKind::command: {
        const int target = command_dest_.count(m.generation) ? command_dest_[m.generation] : r.id;
        if (target != r.id) {
          Message fwd = m;
          fwd.src = r.id;
          fwd.dst = next_hop_down(r.id, target);
          if (fwd.dst >= 0) relay(r.id, std::move(fwd), ev.due);
        }
        return;
      }
    }
  }

  void twoway_received(NodeState& r, const Event& ev) {
    proto::TwoWayEvent te;
    te.kind = proto::TwoWayEventKind::received;
    te.msg = ev.msg.get();
    te.generation = ev.msg->generation;
    for (auto& out : proto::twoway_scheme_step(r, sc_.scheme, te)) relay(r.id, out, ev.due);
  }

  void deliver_bats(const HeadFrame& frame) {
    for (const auto& rec : frame.records) {
      trace_.measurements[rec.id].outcome = Outcome::untranslatable;
    }
    apply_translations(trace_.measurements, process_head_frame(head_, frame),
                       nodes_[cfg_.topology.head()].clock.tick_ns());
  }

  void deliver_data(const Message& m) {
    const double tick = nodes_[cfg_.topology.head()].clock.tick_ns();
    for (const auto& rec : m.bundle) {
      MeasurementOutcome& out = trace_.measurements[rec.id];
      if (sc_.scheme == Scheme::flooding || sc_.scheme == Scheme::flooding_rsp) {
        if (rec.node_estimate) {
          const double est_ns = *rec.node_estimate * tick;
          out.outcome = Outcome::ok;
          out.estimate_s = est_ns * 1e-9;
          out.error_s = (est_ns - static_cast<double>(out.true_time.ns)) * 1e-9;
        } else {
          out.outcome = Outcome::untranslatable;
        }
      } else {
        out.outcome = Outcome::not_estimated;
      }
    }
  }

  void finish() {
    trace_.duplicate_pairs = head_.estimates().duplicates();
    for (const auto& n : nodes_) {
      NodeSummary s;
      s.id = n.id;
      s.level = n.level;
      s.parent = n.parent;
      s.role = n.role;
      s.params = n.clock.initial_params();
      s.tick_ns = n.clock.tick_ns();
      s.counters = n.counters;
      trace_.nodes.push_back(s);
    }
  }

  const RunConfig& cfg_;
  const proto::SchemeConfig& sc_;
  SimTime horizon_;
  proto::HeadProcessor head_;
  proto::FloodConfig flood_;
  proto::JitterModel jitter_;
  std::vector<NodeState> nodes_;
  std::vector<RngStream> jitter_rng_;
  std::vector<RngStream> loss_rng_;
  std::vector<std::vector<SimTime>> schedules_;
  std::vector<std::size_t> next_measurement_;
  std::map<std::uint64_t, int> command_dest_;
  EventQueue q_;
  RunTrace trace_;
};

}  // namespace

RunTrace run(const RunConfig& cfg) {
  cfg.topology.validate();
  cfg.scheme.validate();
  if (!(cfg.duration_s > 0.0)) fail(ErrorCode::invalid_config, "duration must be positive");
  for (const auto& n : cfg.topology.nodes) {
    if (std::fabs(n.params.skew()) * 1e6 > cfg.topology.clock.drift.bound_ppm) {
      fail(ErrorCode::invalid_config, "clock skew exceeds the configured bound");
    }
  }
  Engine engine(cfg);
  return engine.run();
}

}  // namespace bats::sim
