#include "bats/report.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "bats/error.hpp"

namespace bats::report {

using ojson = nlohmann::ordered_json;

const char* const kTraceHeader =
    "kind,time_ns,node,level,parent,id,layer,t_child,t_parent,sync_index,local,"
    "outcome,estimate_s,error_s,ratio,offset_ns,tick_ns";

const char* const kSweepHeader =
    "scheme,si_s,window,hops,seed,node,level,measurements,translated,bootstrap,"
    "untranslatable,mae_s,mse_s2,p50_s,p90_s,p99_s,n_tx,n_rx,avg_power_w";

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

constexpr std::size_t kTraceColumns = 17;

// Builds one trace row; unset columns stay empty.
class Row {
 public:
  explicit Row(const char* kind) { cols_[0] = kind; }
  Row& set(std::size_t col, std::int64_t v) {
    cols_[col] = std::to_string(v);
    return *this;
  }
  Row& setu(std::size_t col, std::uint64_t v) {
    cols_[col] = std::to_string(v);
    return *this;
  }
  Row& setd(std::size_t col, double v) {
    cols_[col] = format_double(v);
    return *this;
  }
  Row& sets(std::size_t col, std::string_view v) {
    cols_[col] = std::string(v);
    return *this;
  }
  void write(std::ostream& out) const {
    for (std::size_t i = 0; i < kTraceColumns; ++i) {
      if (i) out << ',';
      out << cols_[i];
    }
    out << '\n';
  }

 private:
  std::string cols_[kTraceColumns];
};

enum Col : std::size_t {
  kKind, kTime, kNode, kLevel, kParent, kId, kLayer, kTChild, kTParent, kSync, kLocal,
  kOutcome, kEstimate, kError, kRatio, kOffset, kTick
};

[[noreturn]] void malformed(std::size_t line, const std::string& what) {
  fail(ErrorCode::io, "trace line " + std::to_string(line) + ": " + what);
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

template <class T>
T parse_int(const std::string& s, std::size_t line) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    malformed(line, "bad integer '" + s + "'");
  }
  return v;
}

double parse_double(const std::string& s, std::size_t line) {
  if (s.empty()) malformed(line, "missing number");
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) malformed(line, "bad number '" + s + "'");
  return v;
}

ojson stats_json(const analysis::ErrorStats& s) {
  return ojson{{"n", s.n},         {"mae_s", s.mae_s}, {"mse_s2", s.mse_s2},
               {"p50_s", s.p50_s}, {"p90_s", s.p90_s}, {"p99_s", s.p99_s},
               {"max_s", s.max_s}};
}

ojson per_kind(const std::array<std::uint64_t, proto::kMessageKinds>& counts) {
  ojson j = ojson::object();
  for (std::size_t k = 0; k < proto::kMessageKinds; ++k) {
    j[std::string(proto::to_string(static_cast<proto::MessageKind>(k)))] = counts[k];
  }
  return j;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

}  // namespace

void write_trace_csv(std::ostream& out, const sim::RunTrace& trace) {
  out << kTraceHeader << '\n';
  Row("run")
      .set(kTime, std::llround(trace.duration_s * 1e9))
      .setu(kId, trace.seed)
      .setu(kSync, trace.config_hash)
      .sets(kOutcome, proto::to_string(trace.scheme))
      .write(out);
  for (const auto& n : trace.nodes) {
    Row("node")
        .set(kNode, n.id)
        .set(kLevel, n.level)
        .set(kParent, n.parent)
        .setd(kRatio, n.params.ratio)
        .setd(kOffset, n.params.offset)
        .setd(kTick, n.tick_ns)
        .write(out);
  }
  for (std::size_t f = 0; f < trace.head_frames.size(); ++f) {
    const auto& frame = trace.head_frames[f];
    Row("frame").set(kTime, frame.at.ns).setu(kId, f).write(out);
    for (const auto& h : frame.pairs) {
      Row("pair")
          .set(kNode, h.node)
          .set(kLayer, h.layer)
          .set(kTChild, h.pair.t_child)
          .set(kTParent, h.pair.t_parent)
          .setu(kSync, h.pair.sync_index)
          .write(out);
    }
    for (const auto& r : frame.records) {
      Row("record").set(kNode, r.origin).setu(kId, r.id).set(kLocal, r.local).write(out);
    }
  }
  for (const auto& m : trace.measurements) {
    Row row("meas");
    row.set(kTime, m.true_time.ns)
        .set(kNode, m.origin)
        .set(kLevel, m.level)
        .setu(kId, m.id)
        .set(kLocal, m.local)
        .sets(kOutcome, sim::to_string(m.outcome));
    if (m.outcome == sim::Outcome::ok || m.outcome == sim::Outcome::bootstrap) {
      row.setd(kEstimate, m.estimate_s).setd(kError, m.error_s);
    }
    row.write(out);
  }
}

sim::RunTrace read_trace_csv(std::istream& in) {
  sim::RunTrace trace;
  std::optional<proto::Scheme> scheme;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) fail(ErrorCode::io, "trace is empty");
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceHeader) malformed(lineno, "unexpected header");
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto c = split(line);
    if (c.size() != kTraceColumns) malformed(lineno, "expected 17 columns");
    const std::string& kind = c[kKind];
    if (kind == "run") {
      trace.duration_s = static_cast<double>(parse_int<std::int64_t>(c[kTime], lineno)) / 1e9;
      trace.seed = parse_int<std::uint64_t>(c[kId], lineno);
      trace.config_hash = parse_int<std::uint64_t>(c[kSync], lineno);
      auto s = proto::scheme_from_string(c[kOutcome]);
      if (!s) malformed(lineno, "unknown scheme '" + c[kOutcome] + "'");
      scheme = *s;
    } else if (kind == "node") {
      sim::NodeSummary n;
      n.id = parse_int<int>(c[kNode], lineno);
      n.level = parse_int<int>(c[kLevel], lineno);
      n.parent = parse_int<int>(c[kParent], lineno);
      n.params = ClockParams{parse_double(c[kRatio], lineno), parse_double(c[kOffset], lineno)};
      n.tick_ns = parse_double(c[kTick], lineno);
      n.role = n.level == 0 ? proto::Role::head : proto::Role::leaf;
      trace.nodes.push_back(n);
    } else if (kind == "frame") {
      sim::HeadFrame f;
      f.at = SimTime{parse_int<std::int64_t>(c[kTime], lineno)};
      trace.head_frames.push_back(std::move(f));
    } else if (kind == "pair" || kind == "record") {
      if (trace.head_frames.empty()) malformed(lineno, kind + " row before any frame");
      auto& f = trace.head_frames.back();
      if (kind == "pair") {
        proto::HopRecord h;
        h.node = parse_int<int>(c[kNode], lineno);
        h.layer = parse_int<int>(c[kLayer], lineno);
        h.pair.t_child = parse_int<std::int64_t>(c[kTChild], lineno);
        h.pair.t_parent = parse_int<std::int64_t>(c[kTParent], lineno);
        h.pair.sync_index = parse_int<std::uint64_t>(c[kSync], lineno);
        f.pairs.push_back(h);
      } else {
        proto::MeasurementRecord r;
        r.origin = parse_int<int>(c[kNode], lineno);
        r.id = parse_int<std::uint64_t>(c[kId], lineno);
        r.local = parse_int<std::int64_t>(c[kLocal], lineno);
        f.records.push_back(r);
      }
    } else if (kind == "meas") {
      sim::MeasurementOutcome m;
      m.id = parse_int<std::uint64_t>(c[kId], lineno);
      if (m.id != trace.measurements.size()) malformed(lineno, "measurement ids out of order");
      m.true_time = SimTime{parse_int<std::int64_t>(c[kTime], lineno)};
      m.origin = parse_int<int>(c[kNode], lineno);
      m.level = parse_int<int>(c[kLevel], lineno);
      m.local = parse_int<std::int64_t>(c[kLocal], lineno);
      auto o = sim::outcome_from_string(c[kOutcome]);
      if (!o) malformed(lineno, "unknown outcome '" + c[kOutcome] + "'");
      m.outcome = *o;
      if (!c[kEstimate].empty()) {
        m.estimate_s = parse_double(c[kEstimate], lineno);
        m.error_s = parse_double(c[kError], lineno);
      }
      trace.measurements.push_back(m);
    } else {
      malformed(lineno, "unknown row kind '" + kind + "'");
    }
  }
  if (trace.nodes.empty()) fail(ErrorCode::io, "trace has no node rows");
  for (auto& n : trace.nodes) {
    if (n.role == proto::Role::head) continue;
    for (const auto& other : trace.nodes) {
      if (other.parent == n.id) n.role = proto::Role::gateway;
    }
  }
  // Traces without a run row: head frames exist only under head-side estimation.
  trace.scheme = scheme ? *scheme
                        : trace.head_frames.empty() ? proto::Scheme::flooding : proto::Scheme::bats;
  return trace;
}

void write_events(std::ostream& out, const sim::RunTrace& trace) {
  for (const auto& e : trace.events) {
    out << e.t.ns << ' ' << e.node << ' ' << e.kind << '\n';
  }
}

std::string summary_json(const sim::RunTrace& trace, const cfg::ExperimentConfig* config,
                         const analysis::EnergyModel* energy) {
  ojson j;
  if (config) {
    j["config_hash"] = hex64(config->hash());
    j["seed"] = config->seed;
  } else {
    if (trace.config_hash != 0) j["config_hash"] = hex64(trace.config_hash);
    j["seed"] = trace.seed;
  }
  j["scheme"] = std::string(proto::to_string(trace.scheme));
  j["estimator"] = std::string(est::to_string(trace.method));
  j["window"] = trace.window;
  j["duration_s"] = trace.duration_s;

  std::map<sim::Outcome, std::uint64_t> outcomes;
  for (const auto& m : trace.measurements) ++outcomes[m.outcome];
  ojson totals = {{"measurements", trace.measurements.size()},
                  {"head_frames", trace.head_frames.size()}};
  for (sim::Outcome o : {sim::Outcome::ok, sim::Outcome::bootstrap,
                         sim::Outcome::untranslatable, sim::Outcome::not_estimated,
                         sim::Outcome::undelivered}) {
    totals[std::string(sim::to_string(o))] = outcomes[o];
  }
  totals["lost_frames"] = trace.lost_frames;
  totals["lost_pairs"] = trace.lost_pairs;
  totals["lost_records"] = trace.lost_records;
  totals["duplicate_pairs"] = trace.duplicate_pairs;
  j["totals"] = totals;

  bool have_accuracy = std::any_of(trace.measurements.begin(), trace.measurements.end(),
                                   [](const auto& m) { return m.outcome == sim::Outcome::ok; });
  std::optional<analysis::AccuracyReport> acc;
  if (have_accuracy) acc = analysis::accuracy_metrics(trace);
  j["accuracy"] = acc ? stats_json(acc->overall) : ojson(nullptr);

  std::optional<analysis::EnergyLedger> ledger;
  if (energy) ledger = analysis::energy_from_trace(trace, *energy);

  ojson nodes = ojson::array();
  for (const auto& n : trace.nodes) {
    ojson e = {{"id", n.id},
               {"level", n.level},
               {"parent", n.parent},
               {"role", std::string(proto::to_string(n.role))},
               {"ratio", n.params.ratio},
               {"offset_ns", n.params.offset},
               {"tick_ns", n.tick_ns},
               {"n_tx", n.counters.total_tx()},
               {"n_rx", n.counters.total_rx()},
               {"tx", per_kind(n.counters.tx)},
               {"rx", per_kind(n.counters.rx)},
               {"measurements", n.counters.measurements},
               {"node_estimates", n.counters.estimates}};
    if (acc) {
      if (const auto* a = acc->find(n.id)) {
        e["accuracy"] = a->stats ? stats_json(*a->stats) : ojson(nullptr);
        e["bootstrap"] = a->bootstrap;
        e["untranslatable"] = a->untranslatable;
        e["not_estimated"] = a->not_estimated;
        e["undelivered"] = a->undelivered;
      }
    }
    if (ledger) {
      if (const auto* en = ledger->find(n.id)) {
        e["energy"] = {{"tx_s", en->dwell.tx_s},
                       {"listen_s", en->dwell.listen_s},
                       {"mcu_s", en->dwell.mcu_s},
                       {"idle_s", en->dwell.idle_s},
                       {"energy_j", en->energy_j},
                       {"avg_power_w", en->avg_power_w}};
      }
    }
    nodes.push_back(e);
  }
  j["nodes"] = nodes;
  if (config) j["config"] = ojson::parse(config->canonical_json());
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

namespace {

struct SweepJob {
  proto::Scheme scheme;
  double si_s;
  int hops;
  std::uint64_t seed;
};

void rows_for(const sim::RunTrace& trace, const SweepJob& job, std::size_t window,
              const analysis::EnergyModel& energy, std::vector<SweepRow>& out) {
  std::optional<analysis::AccuracyReport> acc;
  if (std::any_of(trace.measurements.begin(), trace.measurements.end(),
                  [](const auto& m) { return m.outcome == sim::Outcome::ok; })) {
    acc = analysis::accuracy_metrics(trace);
  }
  const auto ledger = analysis::energy_from_trace(trace, energy);
  for (const auto& n : trace.nodes) {
    if (n.role == proto::Role::head) continue;
    SweepRow r;
    r.scheme = job.scheme;
    r.si_s = job.si_s;
    r.window = window;
    r.hops = job.hops;
    r.seed = job.seed;
    r.node = n.id;
    r.level = n.level;
    if (acc) {
      if (const auto* a = acc->find(n.id)) r.accuracy = *a;
    } else {
      r.accuracy.node = n.id;
      r.accuracy.level = n.level;
    }
    r.n_tx = n.counters.total_tx();
    r.n_rx = n.counters.total_rx();
    if (const auto* e = ledger.find(n.id)) r.avg_power_w = e->avg_power_w;
    out.push_back(r);
  }
}

std::vector<SweepRow> run_job(const cfg::ExperimentConfig& base, const SweepJob& job) {
  const cfg::SweepGrid& grid = *base.sweep;
  cfg::ExperimentConfig c = base;
  c.sweep.reset();
  c.scheme.scheme = job.scheme;
  c.scheme.si_s = job.si_s;
  if (job.hops > 0) {
    c.hops = job.hops;
    c.parents.clear();
  }
  c.seed = job.seed;
  c.window_auto = false;
  std::vector<std::size_t> windows = grid.window;
  if (windows.empty()) windows = {proto::default_window(job.si_s)};
  if (c.scheme.node_precision == proto::NodePrecision::fp32 &&
      job.scheme != proto::Scheme::flooding_rsp) {
    c.scheme.node_precision = proto::NodePrecision::fp64;
  }

  std::vector<SweepRow> rows;
  if (job.scheme == proto::Scheme::bats && grid.replay) {
    c.scheme.window = windows.front();
    c.finalize();
    const sim::RunTrace trace = sim::run(c.run_config());
    for (std::size_t w : windows) {
      rows_for(analysis::replay(trace, c.scheme.method, w), job, w, c.energy, rows);
    }
  } else {
    for (std::size_t w : windows) {
      c.scheme.window = w;
      c.finalize();
      rows_for(sim::run(c.run_config()), job, w, c.energy, rows);
    }
  }
  return rows;
}

void cell(std::ostream& out, const std::optional<analysis::ErrorStats>& s,
          double analysis::ErrorStats::*field) {
  out << ',';
  if (s) out << format_double((*s).*field);
}

}  // namespace

std::vector<SweepRow> run_sweep(const cfg::ExperimentConfig& config) {
  if (!config.sweep) fail(ErrorCode::invalid_config, "config has no sweep section");
  const cfg::SweepGrid& grid = *config.sweep;
  std::vector<SweepJob> jobs;
  for (auto scheme : grid.scheme) {
    for (double si : grid.si_s) {
      for (int hops : grid.hops) {
        for (auto seed : grid.seeds) jobs.push_back(SweepJob{scheme, si, hops, seed});
      }
    }
  }
  if (jobs.empty()) fail(ErrorCode::invalid_config, "sweep grid is empty");

  std::vector<std::vector<SweepRow>> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        results[i] = run_job(config, jobs[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  unsigned threads = grid.threads ? grid.threads : std::thread::hardware_concurrency();
  threads = std::clamp<unsigned>(threads, 1, static_cast<unsigned>(jobs.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<SweepRow> rows;
  for (auto& r : results) rows.insert(rows.end(), r.begin(), r.end());
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << kSweepHeader << '\n';
  for (const auto& r : rows) {
    const auto& a = r.accuracy;
    out << proto::to_string(r.scheme) << ',' << format_double(r.si_s) << ','
        << (r.window == 0 ? std::string("all") : std::to_string(r.window)) << ',' << r.hops
        << ',' << r.seed << ',' << r.node << ',' << r.level << ',' << a.measurements << ','
        << (a.stats ? a.stats->n : 0) << ',' << a.bootstrap << ',' << a.untranslatable;
    cell(out, a.stats, &analysis::ErrorStats::mae_s);
    cell(out, a.stats, &analysis::ErrorStats::mse_s2);
    cell(out, a.stats, &analysis::ErrorStats::p50_s);
    cell(out, a.stats, &analysis::ErrorStats::p90_s);
    cell(out, a.stats, &analysis::ErrorStats::p99_s);
    out << ',' << r.n_tx << ',' << r.n_rx << ',' << format_double(r.avg_power_w) << '\n';
  }
}

}  // namespace bats::report
