#include "bats/bats.h"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <memory>
#include <new>
#include <optional>
#include <sstream>
#include <string>

#include "bats/analysis.hpp"
#include "bats/config.hpp"
#include "bats/error.hpp"
#include "bats/report.hpp"

struct bats_config {
  bats::cfg::ExperimentConfig cfg;
};

struct bats_run {
  bats::sim::RunTrace trace;
  std::optional<bats::cfg::ExperimentConfig> cfg;
  std::optional<bats::analysis::AccuracyReport> accuracy;
  std::optional<bats::analysis::EnergyLedger> energy;
};

namespace {

thread_local std::string g_last_error;

bats_status from_code(bats::ErrorCode c) {
  using bats::ErrorCode;
  switch (c) {
    case ErrorCode::contract_violation: return BATS_ERR_CONTRACT;
    case ErrorCode::insufficient_data: return BATS_ERR_INSUFFICIENT_DATA;
    case ErrorCode::singular_system: return BATS_ERR_SINGULAR;
    case ErrorCode::division_by_zero: return BATS_ERR_DIVISION_BY_ZERO;
    case ErrorCode::overflow: return BATS_ERR_OVERFLOW;
    case ErrorCode::invalid_config: return BATS_ERR_CONFIG;
    case ErrorCode::io: return BATS_ERR_IO;
    case ErrorCode::unsupported: return BATS_ERR_UNSUPPORTED;
  }
  return BATS_ERR_INTERNAL;
}

bats_status invalid(const char* what) {
  g_last_error = what;
  return BATS_ERR_INVALID_ARGUMENT;
}

// Runs f, translating exceptions into status codes and the thread's message.
template <class F>
bats_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return BATS_OK;
  } catch (const bats::Error& e) {
    g_last_error = e.what();
    return from_code(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return BATS_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return BATS_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return BATS_ERR_INTERNAL;
  }
}

template <class W>
void to_path(const char* path, W&& write) {
  if (std::string(path) == "-") {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) bats::fail(bats::ErrorCode::io, std::string("cannot open ") + path);
  write(out);
  if (!out) bats::fail(bats::ErrorCode::io, std::string("write failed: ") + path);
}

void finish_run(bats_run& r) {
  const bool any_ok = std::any_of(r.trace.measurements.begin(), r.trace.measurements.end(),
                                  [](const auto& m) { return m.outcome == bats::sim::Outcome::ok; });
  if (any_ok) r.accuracy = bats::analysis::accuracy_metrics(r.trace);
  if (r.cfg) r.energy = bats::analysis::energy_from_trace(r.trace, r.cfg->energy);
}

void fill(bats_accuracy& out, const std::optional<bats::analysis::ErrorStats>& s) {
  out = bats_accuracy{};
  if (!s) return;
  out.n = s->n;
  out.mae_s = s->mae_s;
  out.mse_s2 = s->mse_s2;
  out.p50_s = s->p50_s;
  out.p90_s = s->p90_s;
  out.p99_s = s->p99_s;
  out.max_s = s->max_s;
}

}  // namespace

extern "C" {

const char* bats_version(void) { return "1.0.0"; }

const char* bats_status_string(bats_status status) {
  switch (status) {
    case BATS_OK: return "ok";
    case BATS_ERR_INVALID_ARGUMENT: return "invalid argument";
    case BATS_ERR_CONTRACT: return "contract violation";
    case BATS_ERR_INSUFFICIENT_DATA: return "insufficient data";
    case BATS_ERR_SINGULAR: return "singular system";
    case BATS_ERR_DIVISION_BY_ZERO: return "division by zero";
    case BATS_ERR_OVERFLOW: return "overflow";
    case BATS_ERR_CONFIG: return "invalid configuration";
    case BATS_ERR_IO: return "i/o error";
    case BATS_ERR_UNSUPPORTED: return "unsupported";
    case BATS_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* bats_last_error(void) { return g_last_error.c_str(); }

bats_status bats_config_parse(const char* text, bats_config** out) {
  if (!text || !out) return invalid("null argument");
  *out = nullptr;
  return guarded([&] { *out = new bats_config{bats::cfg::parse_config(text)}; });
}

bats_status bats_config_load(const char* path, bats_config** out) {
  if (!path || !out) return invalid("null argument");
  *out = nullptr;
  return guarded([&] { *out = new bats_config{bats::cfg::load_config(path)}; });
}

bats_status bats_config_set_seed(bats_config* cfg, uint64_t seed) {
  if (!cfg) return invalid("null config");
  return guarded([&] { cfg->cfg.seed = seed; });
}

bats_status bats_config_set_window(bats_config* cfg, uint32_t window) {
  if (!cfg) return invalid("null config");
  return guarded([&] {
    bats::cfg::ExperimentConfig c = cfg->cfg;
    c.window_auto = false;
    c.scheme.window = window;
    c.finalize();
    cfg->cfg = c;
  });
}

bats_status bats_config_hash(const bats_config* cfg, uint64_t* out) {
  if (!cfg || !out) return invalid("null argument");
  return guarded([&] { *out = cfg->cfg.hash(); });
}

void bats_config_free(bats_config* cfg) { delete cfg; }

bats_status bats_run_execute(const bats_config* cfg, bats_run** out) {
  if (!cfg || !out) return invalid("null argument");
  *out = nullptr;
  return guarded([&] {
    auto r = std::make_unique<bats_run>();
    r->cfg = cfg->cfg;
    r->trace = bats::sim::run(cfg->cfg.run_config());
    r->trace.config_hash = cfg->cfg.hash();
    finish_run(*r);
    *out = r.release();
  });
}

bats_status bats_replay_load(const char* trace_path, const char* estimator,
                             uint32_t window, bats_run** out) {
  if (!trace_path || !out) return invalid("null argument");
  *out = nullptr;
  auto method = bats::est::method_from_string(estimator ? estimator : "lsq");
  if (!method) return invalid("unknown estimator");
  return guarded([&] {
    std::ifstream in(trace_path, std::ios::binary);
    if (!in) bats::fail(bats::ErrorCode::io, std::string("cannot open ") + trace_path);
    auto r = std::make_unique<bats_run>();
    r->trace = bats::analysis::replay(bats::report::read_trace_csv(in), *method, window);
    finish_run(*r);
    *out = r.release();
  });
}

bats_status bats_run_node_count(const bats_run* run, size_t* out) {
  if (!run || !out) return invalid("null argument");
  *out = run->trace.nodes.size();
  g_last_error.clear();
  return BATS_OK;
}

bats_status bats_run_node_info(const bats_run* run, size_t index, bats_node_info* out) {
  if (!run || !out) return invalid("null argument");
  if (index >= run->trace.nodes.size()) return invalid("node index out of range");
  const auto& n = run->trace.nodes[index];
  *out = bats_node_info{};
  out->id = n.id;
  out->level = n.level;
  out->parent = n.parent;
  out->n_tx = n.counters.total_tx();
  out->n_rx = n.counters.total_rx();
  out->measurements = n.counters.measurements;
  if (run->energy) {
    if (const auto* e = run->energy->find(n.id)) out->avg_power_w = e->avg_power_w;
  }
  g_last_error.clear();
  return BATS_OK;
}

bats_status bats_run_accuracy(const bats_run* run, int32_t node, bats_accuracy* out) {
  if (!run || !out) return invalid("null argument");
  if (!run->accuracy) {
    g_last_error = "run holds no translated measurements";
    return BATS_ERR_INSUFFICIENT_DATA;
  }
  if (node < 0) {
    fill(*out, run->accuracy->overall);
    for (const auto& a : run->accuracy->nodes) {
      out->bootstrap += a.bootstrap;
      out->untranslatable += a.untranslatable;
      out->not_estimated += a.not_estimated;
      out->undelivered += a.undelivered;
    }
  } else {
    const auto* a = run->accuracy->find(node);
    if (!a) return invalid("no such sensor node");
    fill(*out, a->stats);
    out->bootstrap = a->bootstrap;
    out->untranslatable = a->untranslatable;
    out->not_estimated = a->not_estimated;
    out->undelivered = a->undelivered;
  }
  g_last_error.clear();
  return BATS_OK;
}

bats_status bats_run_write_csv(const bats_run* run, const char* path) {
  if (!run || !path) return invalid("null argument");
  return guarded([&] {
    to_path(path, [&](std::ostream& o) { bats::report::write_trace_csv(o, run->trace); });
  });
}

bats_status bats_run_write_summary(const bats_run* run, const char* path) {
  if (!run || !path) return invalid("null argument");
  return guarded([&] {
    const std::string s = bats::report::summary_json(
        run->trace, run->cfg ? &*run->cfg : nullptr, run->cfg ? &run->cfg->energy : nullptr);
    to_path(path, [&](std::ostream& o) { o << s; });
  });
}

bats_status bats_run_write_events(const bats_run* run, const char* path) {
  if (!run || !path) return invalid("null argument");
  return guarded([&] {
    to_path(path, [&](std::ostream& o) { bats::report::write_events(o, run->trace); });
  });
}

bats_status bats_run_csv(const bats_run* run, char* buf, size_t cap, size_t* needed) {
  if (!run || !needed || (!buf && cap)) return invalid("null argument");
  return guarded([&] {
    std::ostringstream ss;
    bats::report::write_trace_csv(ss, run->trace);
    const std::string s = ss.str();
    *needed = s.size() + 1;
    if (buf && cap >= s.size() + 1) {
      s.copy(buf, s.size());
      buf[s.size()] = '\0';
    }
  });
}

void bats_run_free(bats_run* run) { delete run; }

bats_status bats_sweep_execute(const bats_config* cfg, const char* csv_path) {
  if (!cfg || !csv_path) return invalid("null argument");
  return guarded([&] {
    const auto rows = bats::report::run_sweep(cfg->cfg);
    to_path(csv_path, [&](std::ostream& o) { bats::report::write_sweep_csv(o, rows); });
  });
}

bats_status bats_count_conventional(int32_t hops, uint64_t measurements, uint64_t* out) {
  if (!out) return invalid("null argument");
  return guarded([&] { *out = bats::analysis::count_conventional(hops, measurements); });
}

bats_status bats_count_proposed(int32_t hops, bats_bundling mode, uint64_t* out) {
  if (!out) return invalid("null argument");
  bats::proto::Bundling b;
  switch (mode) {
    case BATS_BUNDLING_NONE: b = bats::proto::Bundling::none; break;
    case BATS_BUNDLING_SELF: b = bats::proto::Bundling::self_data; break;
    case BATS_BUNDLING_ALL: b = bats::proto::Bundling::all_data; break;
    default: return invalid("unknown bundling mode");
  }
  return guarded([&] { *out = bats::analysis::count_proposed(hops, b); });
}

bats_status bats_scheme_counts(const char* scheme, double si_s, double duration_s,
                               uint64_t measurements, uint64_t* n_tx, uint64_t* n_rx) {
  if (!scheme || !n_tx || !n_rx) return invalid("null argument");
  auto s = bats::proto::scheme_from_string(scheme);
  if (!s) {
    g_last_error = std::string("unknown scheme '") + scheme + "'";
    return BATS_ERR_UNSUPPORTED;
  }
  return guarded([&] {
    const auto cell = bats::analysis::scheme_counts(*s, si_s, duration_s, measurements);
    *n_tx = cell.n_tx;
    *n_rx = cell.n_rx;
  });
}

}  // extern "C"
