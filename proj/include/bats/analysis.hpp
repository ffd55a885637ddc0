#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "bats/protocol.hpp"
#include "bats/simnet.hpp"

namespace bats::analysis {

// Transmissions plus receptions at sensor nodes of an n-hop chain: one beacon
// wave and m measurement messages per node, each relayed to the head.
std::uint64_t count_conventional(int n, std::uint64_t m);

// Same accounting for one BATS report wave. Only self_data and all_data are
// defined.
std::uint64_t count_proposed(int n, proto::Bundling mode);

struct SchemeCounts {
  std::uint64_t n_tx = 0;
  std::uint64_t n_rx = 0;
  bool operator==(const SchemeCounts&) const = default;
};

// Single-hop sensor counts over `duration_s`; a non-dividing SI is floored.
SchemeCounts scheme_counts(proto::Scheme scheme, double si_s, double duration_s,
                         std::uint64_t measurements);

// Trace-side counterpart: frames sent and received by one node.
SchemeCounts trace_counts(const sim::NodeSummary& node);

// ---------------------------------------------------------------------------
// Energy.

enum class RadioSchedule {
  always_on,  // listening whenever not transmitting
  low_power,  // periodic channel checks at lpl_duty, plus receptions
  scheduled,  // radio off except around own transmissions and expected receptions
  automatic,  // flooding: always_on; every other scheme: scheduled
};

std::string_view to_string(RadioSchedule s);
std::optional<RadioSchedule> schedule_from_string(std::string_view s);

struct EnergyModel {
  double voltage_v = 3.3;
  double i_tx_a = 17.4e-3;
  double i_rx_a = 19.7e-3;   // receive and listen
  double i_idle_a = 0.02e-3; // radio off, MCU asleep
  double i_mcu_a = 1.8e-3;   // added while the MCU is active
  RadioSchedule schedule = RadioSchedule::automatic;
  double lpl_duty = 0.05;
  double wake_guard_s = 0.005;     // listening around each expected reception
  double wake_overhead_s = 0.002;  // radio start-up per transmission
  double mcu_per_event_s = 0.001;  // per measurement and per frame

  // Throws invalid_config.
  void validate() const;
};

struct Dwell {
  double tx_s = 0.0;
  double listen_s = 0.0;
  double mcu_s = 0.0;
  double idle_s = 0.0;
};

struct EnergyEntry {
  int node = 0;
  Dwell dwell;
  std::uint64_t n_tx = 0;
  std::uint64_t n_rx = 0;
  double energy_j = 0.0;
  double avg_power_w = 0.0;
};

struct EnergyLedger {
  double duration_s = 0.0;
  std::vector<EnergyEntry> nodes;  // sensors only
  const EnergyEntry* find(int node) const;
};

RadioSchedule resolve_schedule(RadioSchedule s, proto::Scheme scheme);

// State dwell times of one node over the run under the schedule.
Dwell dwell_for(const sim::NodeSummary& node, double duration_s, RadioSchedule schedule,
                const EnergyModel& model);

// V * sum(I_state * dwell_state). Throws contract_violation on a negative dwell.
double energy_joules(const Dwell& d, const EnergyModel& model);

EnergyLedger energy_from_trace(const sim::RunTrace& trace, const EnergyModel& model);

// ---------------------------------------------------------------------------
// Accuracy.

struct ErrorStats {
  std::size_t n = 0;
  double mae_s = 0.0;
  double mse_s2 = 0.0;
  double p50_s = 0.0;  // percentiles of |error|, nearest rank
  double p90_s = 0.0;
  double p99_s = 0.0;
  double max_s = 0.0;
};

// Throws insufficient_data for an empty sample.
ErrorStats error_stats(std::span<const double> errors);

struct NodeAccuracy {
  int node = 0;
  int level = 0;
  std::size_t measurements = 0;
  std::size_t bootstrap = 0;
  std::size_t untranslatable = 0;
  std::size_t not_estimated = 0;
  std::size_t undelivered = 0;
  std::optional<ErrorStats> stats;  // over `ok` outcomes
};

struct AccuracyReport {
  std::vector<NodeAccuracy> nodes;  // sensors in id order
  ErrorStats overall;
  const NodeAccuracy* find(int node) const;
};

// Throws insufficient_data when no measurement was translated.
AccuracyReport accuracy_metrics(const sim::RunTrace& trace);

// Error time series of one node: (true time, error) for `ok` outcomes.
std::vector<std::pair<double, double>> error_series(const sim::RunTrace& trace, int node);

// ---------------------------------------------------------------------------
// Replay.

// Head-side outcomes recomputed from the stored head frames under another
// estimator configuration. Network behaviour of a BATS run does not depend on
// the head's estimator, so this equals re-simulating with that configuration.
std::vector<sim::MeasurementOutcome> refit(const sim::RunTrace& trace, est::Method method,
                                           std::size_t window);

sim::RunTrace replay(const sim::RunTrace& trace, est::Method method, std::size_t window);

}  // namespace bats::analysis
