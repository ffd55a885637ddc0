#include "bats/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "bats/error.hpp"

namespace bats::cfg {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& what) { fail(ErrorCode::invalid_config, what); }

// Object reader that rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) bad(path_ + " must be an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number()) bad(name(key) + " must be a number");
    return v.get<double>();
  }

  std::uint64_t count(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      bad(name(key) + " must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  bool flag(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_boolean()) bad(name(key) + " must be true or false");
    return v.get<bool>();
  }

  std::string text(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_string()) bad(name(key) + " must be a string");
    return v.get<std::string>();
  }

  std::string name(const std::string& key) const { return path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) bad("unknown key " + path_ + "." + it.key());
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::optional<std::size_t> window_value(const json& v, const std::string& where) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "all") return 0;
    if (s == "auto") return std::nullopt;
    bad(where + " must be an integer, \"all\" or \"auto\"");
  }
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    bad(where + " must be an integer, \"all\" or \"auto\"");
  }
  return v.get<std::size_t>();
}

proto::Scheme scheme_value(const std::string& s, const std::string& where) {
  auto v = proto::scheme_from_string(s);
  if (!v) bad(where + ": unknown scheme '" + s + "'");
  return *v;
}

double tick_value(const json& v, const std::string& where) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "software") return kSoftwareTimerTickNs;
    if (s == "crystal") return kCrystalTickNs;
    if (s == "fine") return kFineTickNs;
    bad(where + " must be a number or one of software, crystal, fine");
  }
  if (!v.is_number()) bad(where + " must be a number");
  return v.get<double>();
}

template <class T, class F>
std::vector<T> list(const json& v, const std::string& where, F each) {
  if (!v.is_array() || v.empty()) bad(where + " must be a non-empty array");
  std::vector<T> out;
  for (const auto& e : v) out.push_back(each(e));
  return out;
}

void read_topology(Section s, ExperimentConfig& c) {
  c.hops = static_cast<int>(s.count("hops", 1));
  if (s.has("parents")) {
    c.parents = list<int>(s.raw("parents"), s.name("parents"), [&](const json& e) {
      if (!e.is_number_integer()) bad(s.name("parents") + " must hold node ids");
      return e.get<int>();
    });
  }
  c.link.propagation_ns = s.number("propagation_ns", c.link.propagation_ns);
  c.link.jitter_ns = s.number("jitter_ns", c.link.jitter_ns);
  c.link.loss = s.number("loss", c.link.loss);
  c.link.bitrate_bps = s.number("bitrate_bps", c.link.bitrate_bps);
  s.finish();
}

void read_clock(Section s, ExperimentConfig& c) {
  if (s.has("tick_ns")) c.clock.tick_ns = tick_value(s.raw("tick_ns"), s.name("tick_ns"));
  if (s.has("head_tick_ns")) {
    c.clock.head_tick_ns = tick_value(s.raw("head_tick_ns"), s.name("head_tick_ns"));
  }
  c.clock.skew_ppm_max = s.number("skew_ppm_max", c.clock.skew_ppm_max);
  c.clock.offset_max_s = s.number("offset_max_s", c.clock.offset_max_s);
  const std::string drift = s.text("drift", "constant");
  if (drift == "constant") {
    c.clock.drift.kind = DriftKind::constant;
  } else if (drift == "random_walk") {
    c.clock.drift.kind = DriftKind::random_walk;
  } else {
    bad(s.name("drift") + " must be constant or random_walk");
  }
  c.clock.drift.walk_sigma_ppm = s.number("walk_sigma_ppm", c.clock.drift.walk_sigma_ppm);
  c.clock.drift.bound_ppm = s.number("bound_ppm", c.clock.drift.bound_ppm);
  const double step = s.number("drift_step_s", 1.0);
  if (!(step > 0.0)) bad(s.name("drift_step_s") + " must be positive");
  c.clock.drift.step_ns = SimTime::from_seconds(step).ns;
  s.finish();
}

void read_scheme(Section s, ExperimentConfig& c) {
  proto::SchemeConfig& sc = c.scheme;
  sc.scheme = scheme_value(s.text("name", "bats"), s.name("name"));
  sc.si_s = s.number("si_s", sc.si_s);
  sc.measurement_interval_s = s.number("measurement_interval_s", sc.measurement_interval_s);
  sc.measurement_phase_s = s.number("measurement_phase_s", sc.measurement_phase_s);
  if (s.has("measurements_per_node")) {
    sc.measurements_per_node = s.count("measurements_per_node", 0);
  }
  sc.bundle_size = s.count("bundle_size", sc.bundle_size);
  const std::string bundling = s.text("bundling", "self");
  auto b = proto::bundling_from_string(bundling);
  if (!b) bad(s.name("bundling") + " must be none, self or all");
  sc.bundling = *b;
  if (s.has("window")) {
    auto w = window_value(s.raw("window"), s.name("window"));
    c.window_auto = !w.has_value();
    if (w) sc.window = *w;
  }
  const std::string estimator = s.text("estimator", "lsq");
  auto m = est::method_from_string(estimator);
  if (!m) bad(s.name("estimator") + " must be lsq, cumulative or rsp");
  sc.method = *m;
  const std::string precision = s.text("node_precision", "fp64");
  if (precision == "fp64") {
    sc.node_precision = proto::NodePrecision::fp64;
  } else if (precision == "fp32") {
    sc.node_precision = proto::NodePrecision::fp32;
  } else {
    bad(s.name("node_precision") + " must be fp64 or fp32");
  }
  const std::string rounding = s.text("rounding", "nearest");
  if (rounding == "nearest") {
    sc.rounding = precision::Rounding::nearest_even;
  } else if (rounding == "chop") {
    sc.rounding = precision::Rounding::chop;
  } else {
    bad(s.name("rounding") + " must be nearest or chop");
  }
  sc.keepalive = s.flag("keepalive", sc.keepalive);
  sc.command_interval_s = s.number("command_interval_s", sc.command_interval_s);
  sc.relay_delay_s = s.number("relay_delay_s", sc.relay_delay_s);
  sc.level_stagger_s = s.number("level_stagger_s", sc.level_stagger_s);
  sc.beacon_phase_s = s.number("beacon_phase_s", sc.beacon_phase_s);
  s.finish();
}

void read_energy(Section s, ExperimentConfig& c) {
  analysis::EnergyModel& e = c.energy;
  e.voltage_v = s.number("voltage_v", e.voltage_v);
  // Currents in mA, or in A under the *_a keys (the canonical form uses A).
  auto current = [&](const char* ma, const char* a, double& out) {
    if (s.has(ma) && s.has(a)) bad(s.name(ma) + " and " + s.name(a) + " are exclusive");
    if (s.has(ma)) out = s.number(ma, 0.0) * 1e-3;
    if (s.has(a)) out = s.number(a, 0.0);
  };
  current("i_tx_ma", "i_tx_a", e.i_tx_a);
  current("i_rx_ma", "i_rx_a", e.i_rx_a);
  current("i_idle_ma", "i_idle_a", e.i_idle_a);
  current("i_mcu_ma", "i_mcu_a", e.i_mcu_a);
  const std::string schedule = s.text("schedule", "auto");
  auto sch = analysis::schedule_from_string(schedule);
  if (!sch) bad(s.name("schedule") + " must be always_on, low_power, scheduled or auto");
  e.schedule = *sch;
  e.lpl_duty = s.number("lpl_duty", e.lpl_duty);
  e.wake_guard_s = s.number("wake_guard_s", e.wake_guard_s);
  e.wake_overhead_s = s.number("wake_overhead_s", e.wake_overhead_s);
  e.mcu_per_event_s = s.number("mcu_per_event_s", e.mcu_per_event_s);
  s.finish();
}

void read_sweep(Section s, ExperimentConfig& c) {
  SweepGrid g;
  if (s.has("si_s")) {
    g.si_s = list<double>(s.raw("si_s"), s.name("si_s"), [&](const json& e) {
      if (!e.is_number()) bad(s.name("si_s") + " must hold numbers");
      return e.get<double>();
    });
  }
  if (s.has("window")) {
    g.window = list<std::size_t>(s.raw("window"), s.name("window"), [&](const json& e) {
      auto w = window_value(e, s.name("window"));
      if (!w) bad(s.name("window") + " entries must be integers or \"all\"");
      return *w;
    });
  }
  if (s.has("hops")) {
    g.hops = list<int>(s.raw("hops"), s.name("hops"), [&](const json& e) {
      if (!e.is_number_integer()) bad(s.name("hops") + " must hold integers");
      return e.get<int>();
    });
  }
  if (s.has("scheme")) {
    g.scheme = list<proto::Scheme>(s.raw("scheme"), s.name("scheme"), [&](const json& e) {
      if (!e.is_string()) bad(s.name("scheme") + " must hold scheme names");
      return scheme_value(e.get<std::string>(), s.name("scheme"));
    });
  }
  if (s.has("seeds")) {
    g.seeds = list<std::uint64_t>(s.raw("seeds"), s.name("seeds"), [&](const json& e) {
      if (!e.is_number_unsigned()) bad(s.name("seeds") + " must hold non-negative integers");
      return e.get<std::uint64_t>();
    });
  }
  g.replay = s.flag("replay", g.replay);
  g.threads = static_cast<unsigned>(s.count("threads", 0));
  s.finish();
  c.sweep = g;
}

}  // namespace

void ExperimentConfig::finalize() {
  if (!(duration_s > 0.0)) bad("duration_s must be positive");
  if (parents.empty() && hops < 1) bad("topology.hops must be at least 1");
  if (window_auto) scheme.window = proto::default_window(scheme.si_s);
  scheme.validate();
  energy.validate();
  if (clock.skew_ppm_max > clock.drift.bound_ppm) {
    bad("clock.skew_ppm_max exceeds clock.bound_ppm");
  }
  if (clock.drift.walk_sigma_ppm < 0.0) bad("clock.walk_sigma_ppm must be non-negative");
  if (sweep) {
    if (sweep->si_s.empty()) sweep->si_s = {scheme.si_s};
    if (sweep->hops.empty()) sweep->hops = {parents.empty() ? hops : 0};
    if (sweep->scheme.empty()) sweep->scheme = {scheme.scheme};
    if (sweep->seeds.empty()) sweep->seeds = {seed};
    for (double si : sweep->si_s) {
      if (!(si > 0.0)) bad("sweep.si_s entries must be positive");
    }
    for (int h : sweep->hops) {
      if (h < 1 && parents.empty()) bad("sweep.hops entries must be at least 1");
    }
    for (std::size_t w : sweep->window) {
      if (w == 1) bad("sweep.window entries must be 0 (all) or at least 2");
    }
  }
  run_config().topology.validate();
}

sim::RunConfig ExperimentConfig::run_config() const {
  sim::RunConfig rc;
  rc.topology = parents.empty() ? sim::build_chain(hops, clock, link, seed)
                                : sim::build_tree(parents, clock, link, seed);
  rc.scheme = scheme;
  rc.duration_s = duration_s;
  rc.seed = seed;
  rc.record_events = record_events;
  return rc;
}

std::string ExperimentConfig::canonical_json() const {
  json j;
  j["seed"] = seed;
  j["duration_s"] = duration_s;
  j["record_events"] = record_events;
  j["topology"] = {{"hops", hops},
                   {"propagation_ns", link.propagation_ns},
                   {"jitter_ns", link.jitter_ns},
                   {"loss", link.loss},
                   {"bitrate_bps", link.bitrate_bps}};
  if (!parents.empty()) j["topology"]["parents"] = parents;
  j["clock"] = {{"tick_ns", clock.tick_ns},
                {"head_tick_ns", clock.head_tick_ns},
                {"skew_ppm_max", clock.skew_ppm_max},
                {"offset_max_s", clock.offset_max_s},
                {"drift", clock.drift.kind == DriftKind::constant ? "constant" : "random_walk"},
                {"walk_sigma_ppm", clock.drift.walk_sigma_ppm},
                {"bound_ppm", clock.drift.bound_ppm},
                {"drift_step_s", static_cast<double>(clock.drift.step_ns) * 1e-9}};
  json sc = {{"name", std::string(proto::to_string(scheme.scheme))},
             {"si_s", scheme.si_s},
             {"measurement_interval_s", scheme.measurement_interval_s},
             {"measurement_phase_s", scheme.measurement_phase_s},
             {"bundle_size", scheme.bundle_size},
             {"bundling", std::string(proto::to_string(scheme.bundling))},
             {"window", scheme.window},
             {"estimator", std::string(est::to_string(scheme.method))},
             {"node_precision", scheme.node_precision == proto::NodePrecision::fp32 ? "fp32" : "fp64"},
             {"rounding", scheme.rounding == precision::Rounding::chop ? "chop" : "nearest"},
             {"keepalive", scheme.keepalive},
             {"command_interval_s", scheme.command_interval_s},
             {"relay_delay_s", scheme.relay_delay_s},
             {"level_stagger_s", scheme.level_stagger_s},
             {"beacon_phase_s", scheme.beacon_phase_s}};
  if (scheme.measurements_per_node) sc["measurements_per_node"] = *scheme.measurements_per_node;
  j["scheme"] = sc;
  j["energy"] = {{"voltage_v", energy.voltage_v},
                 {"i_tx_a", energy.i_tx_a},
                 {"i_rx_a", energy.i_rx_a},
                 {"i_idle_a", energy.i_idle_a},
                 {"i_mcu_a", energy.i_mcu_a},
                 {"schedule", std::string(analysis::to_string(energy.schedule))},
                 {"lpl_duty", energy.lpl_duty},
                 {"wake_guard_s", energy.wake_guard_s},
                 {"wake_overhead_s", energy.wake_overhead_s},
                 {"mcu_per_event_s", energy.mcu_per_event_s}};
  if (sweep) {
    std::vector<std::string> schemes;
    for (auto v : sweep->scheme) schemes.emplace_back(proto::to_string(v));
    j["sweep"] = {{"si_s", sweep->si_s},
                  {"window", sweep->window},
                  {"hops", sweep->hops},
                  {"scheme", schemes},
                  {"seeds", sweep->seeds},
                  {"replay", sweep->replay},
                  {"threads", sweep->threads}};
    if (sweep->window.empty()) j["sweep"].erase("window");
  }
  return j.dump();
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a64(canonical_json()); }

ExperimentConfig parse_config(std::string_view text) {
  json root;
  try {
    root = json::parse(text.begin(), text.end(), nullptr, true, true);
  } catch (const json::parse_error& e) {
    bad(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  try {
    Section top(root, "config");
    c.seed = top.count("seed", c.seed);
    c.duration_s = top.number("duration_s", c.duration_s);
    c.record_events = top.flag("record_events", c.record_events);
    if (top.has("topology")) read_topology(Section(top.raw("topology"), "topology"), c);
    if (top.has("clock")) read_clock(Section(top.raw("clock"), "clock"), c);
    if (top.has("scheme")) read_scheme(Section(top.raw("scheme"), "scheme"), c);
    if (top.has("energy")) read_energy(Section(top.raw("energy"), "energy"), c);
    if (top.has("sweep")) read_sweep(Section(top.raw("sweep"), "sweep"), c);
    top.finish();
  } catch (const json::exception& e) {
    bad(std::string("config value error: ") + e.what());
  }
  c.finalize();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace bats::cfg
