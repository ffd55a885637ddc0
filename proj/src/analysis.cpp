#include "bats/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "bats/error.hpp"

namespace bats::analysis {

namespace {
void require_hops(int n) {
  if (n < 1) fail(ErrorCode::contract_violation, "hop count must be at least 1");
}
std::uint64_t hops_squared(int n) {
  // sum over i = 1..n of (2(i-1) + 1)
  return static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n);
}
}  // namespace

std::uint64_t count_conventional(int n, std::uint64_t m) {
  require_hops(n);
  return 2 * static_cast<std::uint64_t>(n - 1) + 1 + m * hops_squared(n);
}

std::uint64_t count_proposed(int n, proto::Bundling mode) {
  require_hops(n);
  switch (mode) {
    case proto::Bundling::self_data: return hops_squared(n);
    case proto::Bundling::all_data: return 2 * static_cast<std::uint64_t>(n - 1) + 1;
    case proto::Bundling::none: break;
  }
  fail(ErrorCode::contract_violation, "message count is defined for self or all bundling");
}

SchemeCounts scheme_counts(proto::Scheme scheme, double si_s, double duration_s,
                         std::uint64_t measurements) {
  if (!(si_s > 0.0) || duration_s < 0.0) {
    fail(ErrorCode::contract_violation, "SI must be positive and duration non-negative");
  }
  const auto per_si = static_cast<std::uint64_t>(std::floor(duration_s / si_s + 1e-9));
  switch (scheme) {
    case proto::Scheme::conventional_two_way: return {measurements + per_si, per_si};
    case proto::Scheme::flooding:
    case proto::Scheme::flooding_rsp:
    case proto::Scheme::reverse_two_way: return {measurements, per_si};
    case proto::Scheme::bats: return {measurements, 0};
  }
  fail(ErrorCode::unsupported, "unknown scheme");
}

SchemeCounts trace_counts(const sim::NodeSummary& node) {
  return {node.counters.total_tx(), node.counters.total_rx()};
}

// ---------------------------------------------------------------------------

std::string_view to_string(RadioSchedule s) {
  switch (s) {
    case RadioSchedule::always_on: return "always_on";
    case RadioSchedule::low_power: return "low_power";
    case RadioSchedule::scheduled: return "scheduled";
    case RadioSchedule::automatic: return "auto";
  }
  return "?";
}

std::optional<RadioSchedule> schedule_from_string(std::string_view s) {
  for (RadioSchedule v : {RadioSchedule::always_on, RadioSchedule::low_power,
                          RadioSchedule::scheduled, RadioSchedule::automatic}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

void EnergyModel::validate() const {
  if (!(voltage_v > 0.0)) fail(ErrorCode::invalid_config, "voltage must be positive");
  for (double i : {i_tx_a, i_rx_a, i_idle_a, i_mcu_a}) {
    if (!(i >= 0.0)) fail(ErrorCode::invalid_config, "currents must be non-negative");
  }
  if (!(lpl_duty >= 0.0 && lpl_duty <= 1.0)) {
    fail(ErrorCode::invalid_config, "low-power duty must lie in [0, 1]");
  }
  if (wake_guard_s < 0.0 || wake_overhead_s < 0.0 || mcu_per_event_s < 0.0) {
    fail(ErrorCode::invalid_config, "energy timing constants must be non-negative");
  }
}

const EnergyEntry* EnergyLedger::find(int node) const {
  for (const auto& e : nodes) {
    if (e.node == node) return &e;
  }
  return nullptr;
}

RadioSchedule resolve_schedule(RadioSchedule s, proto::Scheme scheme) {
  if (s != RadioSchedule::automatic) return s;
  if (scheme == proto::Scheme::flooding || scheme == proto::Scheme::flooding_rsp) {
    return RadioSchedule::always_on;
  }
  return RadioSchedule::scheduled;
}

Dwell dwell_for(const sim::NodeSummary& node, double duration_s, RadioSchedule schedule,
                const EnergyModel& model) {
  const auto& c = node.counters;
  const double n_tx = static_cast<double>(c.total_tx());
  const double n_rx = static_cast<double>(c.total_rx());
  Dwell d;
  d.tx_s = c.tx_airtime_s;
  switch (schedule) {
    case RadioSchedule::always_on:
    case RadioSchedule::automatic:
      d.listen_s = duration_s - d.tx_s;
      break;
    case RadioSchedule::low_power:
      d.listen_s = std::min(model.lpl_duty * duration_s + c.rx_airtime_s,
                            duration_s - d.tx_s);
      break;
    case RadioSchedule::scheduled:
      d.listen_s = c.rx_airtime_s + n_rx * model.wake_guard_s + n_tx * model.wake_overhead_s;
      break;
  }
  d.mcu_s = model.mcu_per_event_s * (static_cast<double>(c.measurements) + n_tx + n_rx);
  d.idle_s = duration_s - d.tx_s - d.listen_s;
  return d;
}

double energy_joules(const Dwell& d, const EnergyModel& model) {
  if (d.tx_s < 0.0 || d.listen_s < 0.0 || d.mcu_s < 0.0 || d.idle_s < 0.0) {
    fail(ErrorCode::contract_violation, "negative dwell time");
  }
  return model.voltage_v * (model.i_tx_a * d.tx_s + model.i_rx_a * d.listen_s +
                            model.i_idle_a * d.idle_s + model.i_mcu_a * d.mcu_s);
}

EnergyLedger energy_from_trace(const sim::RunTrace& trace, const EnergyModel& model) {
  model.validate();
  if (!(trace.duration_s > 0.0)) {
    fail(ErrorCode::contract_violation, "trace has no duration");
  }
  const RadioSchedule schedule = resolve_schedule(model.schedule, trace.scheme);
  EnergyLedger ledger;
  ledger.duration_s = trace.duration_s;
  for (const auto& n : trace.nodes) {
    if (n.role == proto::Role::head) continue;
    EnergyEntry e;
    e.node = n.id;
    e.dwell = dwell_for(n, trace.duration_s, schedule, model);
    e.n_tx = n.counters.total_tx();
    e.n_rx = n.counters.total_rx();
    e.energy_j = energy_joules(e.dwell, model);
    e.avg_power_w = e.energy_j / trace.duration_s;
    ledger.nodes.push_back(e);
  }
  return ledger;
}

// ---------------------------------------------------------------------------

ErrorStats error_stats(std::span<const double> errors) {
  if (errors.empty()) fail(ErrorCode::insufficient_data, "no errors to summarise");
  ErrorStats s;
  s.n = errors.size();
  std::vector<double> mag;
  mag.reserve(errors.size());
  double sum_abs = 0.0, sum_sq = 0.0;
  for (double e : errors) {
    mag.push_back(std::fabs(e));
    sum_abs += std::fabs(e);
    sum_sq += e * e;
  }
  const double n = static_cast<double>(errors.size());
  s.mae_s = sum_abs / n;
  s.mse_s2 = sum_sq / n;
  std::sort(mag.begin(), mag.end());
  auto rank = [&](double p) {
    const auto k = static_cast<std::size_t>(std::ceil(p * n));
    return mag[std::clamp<std::size_t>(k, 1, mag.size()) - 1];
  };
  s.p50_s = rank(0.50);
  s.p90_s = rank(0.90);
  s.p99_s = rank(0.99);
  s.max_s = mag.back();
  return s;
}

const NodeAccuracy* AccuracyReport::find(int node) const {
  for (const auto& n : nodes) {
    if (n.node == node) return &n;
  }
  return nullptr;
}

AccuracyReport accuracy_metrics(const sim::RunTrace& trace) {
  AccuracyReport report;
  std::map<int, std::vector<double>> errors;
  std::map<int, NodeAccuracy> per_node;
  for (const auto& n : trace.nodes) {
    if (n.role == proto::Role::head) continue;
    per_node[n.id] = NodeAccuracy{n.id, n.level, 0, 0, 0, 0, 0, std::nullopt};
  }
  std::vector<double> all;
  for (const auto& m : trace.measurements) {
    NodeAccuracy& a = per_node[m.origin];
    a.node = m.origin;
    a.level = m.level;
    ++a.measurements;
    switch (m.outcome) {
      case sim::Outcome::ok:
        errors[m.origin].push_back(m.error_s);
        all.push_back(m.error_s);
        break;
      case sim::Outcome::bootstrap: ++a.bootstrap; break;
      case sim::Outcome::untranslatable: ++a.untranslatable; break;
      case sim::Outcome::not_estimated: ++a.not_estimated; break;
      case sim::Outcome::undelivered: ++a.undelivered; break;
    }
  }
  if (all.empty()) {
    fail(ErrorCode::insufficient_data, "trace holds no translated measurements");
  }
  for (auto& [id, a] : per_node) {
    auto it = errors.find(id);
    if (it != errors.end()) a.stats = error_stats(it->second);
    report.nodes.push_back(a);
  }
  report.overall = error_stats(all);
  return report;
}

std::vector<std::pair<double, double>> error_series(const sim::RunTrace& trace, int node) {
  std::vector<std::pair<double, double>> out;
  for (const auto& m : trace.measurements) {
    if (m.origin == node && m.outcome == sim::Outcome::ok) {
      out.emplace_back(m.true_time.seconds(), m.error_s);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<sim::MeasurementOutcome> refit(const sim::RunTrace& trace, est::Method method,
                                           std::size_t window) {
  if (trace.scheme != proto::Scheme::bats) {
    fail(ErrorCode::unsupported, "re-fitting applies to head-side estimation runs");
  }
  if (window == 1) {
    fail(ErrorCode::invalid_config, "regression window must be 0 (all) or at least 2");
  }
  std::map<int, int> parent_of;
  int head_id = 0;
  for (const auto& n : trace.nodes) {
    if (n.role == proto::Role::head) {
      head_id = n.id;
    } else {
      parent_of[n.id] = n.parent;
    }
  }
  proto::HeadProcessor head(parent_of, head_id, method, window);
  std::vector<sim::MeasurementOutcome> out = trace.measurements;
  for (auto& m : out) {
    if (m.outcome != sim::Outcome::undelivered) {
      m.outcome = sim::Outcome::undelivered;
      m.estimate_s = 0.0;
      m.error_s = 0.0;
    }
  }
  for (const auto& frame : trace.head_frames) {
    for (const auto& r : frame.records) {
      if (r.id >= out.size()) {
        fail(ErrorCode::contract_violation, "head frame references an unknown record");
      }
      out[r.id].outcome = sim::Outcome::untranslatable;
    }
    sim::apply_translations(out, sim::process_head_frame(head, frame), trace.head_tick_ns());
  }
  return out;
}

sim::RunTrace replay(const sim::RunTrace& trace, est::Method method, std::size_t window) {
  sim::RunTrace out = trace;
  out.measurements = refit(trace, method, window);
  out.method = method;
  out.window = window;
  return out;
}

}  // namespace bats::analysis
