#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bats/analysis.hpp"
#include "bats/config.hpp"
#include "bats/simnet.hpp"

namespace bats::report {

// Trace CSV: a leading run row (duration, seed, config hash, scheme), then one
// row per node, head frame, hop pair, frame record and
// measurement, under a fixed header:
//   kind,time_ns,node,level,parent,id,layer,t_child,t_parent,sync_index,local,
//   outcome,estimate_s,error_s,ratio,offset_ns,tick_ns
extern const char* const kTraceHeader;

void write_trace_csv(std::ostream& out, const sim::RunTrace& trace);

// Restores nodes (without counters), head frames and measurement outcomes.
// Throws io on malformed input.
sim::RunTrace read_trace_csv(std::istream& in);

// One line per event: time_ns node kind.
void write_events(std::ostream& out, const sim::RunTrace& trace);

// JSON summary: config hash, seed, totals, accuracy, per-node counts and
// energy. `config` and `energy` may be null (e.g. for replayed traces).
std::string summary_json(const sim::RunTrace& trace, const cfg::ExperimentConfig* config,
                         const analysis::EnergyModel* energy);

struct SweepRow {
  proto::Scheme scheme = proto::Scheme::bats;
  double si_s = 0.0;
  std::size_t window = 0;
  int hops = 0;
  std::uint64_t seed = 0;
  int node = 0;
  int level = 0;
  analysis::NodeAccuracy accuracy;
  std::uint64_t n_tx = 0;
  std::uint64_t n_rx = 0;
  double avg_power_w = 0.0;
};

extern const char* const kSweepHeader;

// Runs every grid cell of config.sweep (threads per the grid); rows come out
// in grid order regardless of scheduling.
std::vector<SweepRow> run_sweep(const cfg::ExperimentConfig& config);

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

std::string format_double(double v);

}  // namespace bats::report
