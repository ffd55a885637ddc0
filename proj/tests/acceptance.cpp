// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "bats/analysis.hpp"
#include "bats/bats.h"
#include "bats/config.hpp"
#include "bats/estimators.hpp"
#include "bats/precision.hpp"
#include "bats/simnet.hpp"
#include "oracle.hpp"

using namespace bats;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void criterion(int n, const char* what, double budget_s, const std::function<Verdict()>& body) {
  const auto t0 = Clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
  if (dt > budget_s) {
    v.pass = false;
    v.detail += " (over time budget)";
  }
  if (!v.pass) ++failures;
  std::printf("%s %d %s [%.3f s] %s\n", v.pass ? "PASS" : "FAIL", n, what, dt, v.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel(double got, double want) { return std::abs(got - want) / std::abs(want); }

// Mean MAE per level over the `ok` outcomes of one trace.
std::vector<double> mae_by_level(const sim::RunTrace& t, int levels) {
  std::vector<double> sum(levels + 1, 0.0);
  std::vector<std::size_t> n(levels + 1, 0);
  for (const auto& m : t.measurements) {
    if (m.outcome != sim::Outcome::ok) continue;
    sum[m.level] += std::abs(m.error_s);
    ++n[m.level];
  }
  for (int l = 1; l <= levels; ++l) sum[l] = n[l] ? sum[l] / n[l] : NAN;
  return sum;
}

const char* kDriftConfig = R"({
  "duration_s": 600,
  "topology": { "hops": 1, "jitter_ns": 5000 },
  "clock": { "tick_ns": "software", "drift": "random_walk", "walk_sigma_ppm": 0.01 },
  "scheme": { "name": "bats", "si_s": 1, "window": 19, "bundling": "self" } })";

}  // namespace

int main() {
  criterion(1, "closed-form message counts", 0.001, [] {
    const auto a = analysis::count_conventional(4, 2);
    const auto b = analysis::count_proposed(4, proto::Bundling::self_data);
    const auto c = analysis::count_proposed(4, proto::Bundling::all_data);
    return Verdict{a == 39 && b == 16 && c == 7,
                   fmt("conventional=%llu self=%llu all=%llu", (unsigned long long)a,
                       (unsigned long long)b, (unsigned long long)c)};
  });

  criterion(2, "per-scheme counts and single-hop traces", 12 * 10.0, [] {
    struct Row {
      proto::Scheme scheme;
      const char* name;
      std::uint64_t tx[3], rx[3];
    };
    const Row table[] = {
        {proto::Scheme::conventional_two_way, "conventional_two_way", {3700, 460, 136}, {3600, 360, 36}},
        {proto::Scheme::flooding, "flooding", {100, 100, 100}, {3600, 360, 36}},
        {proto::Scheme::reverse_two_way, "reverse_two_way", {100, 100, 100}, {3600, 360, 36}},
        {proto::Scheme::bats, "bats", {100, 100, 100}, {0, 0, 0}},
    };
    const double sis[] = {1.0, 10.0, 100.0};
    Verdict v;
    double slowest = 0.0;
    for (const Row& r : table) {
      for (int k = 0; k < 3; ++k) {
        const auto want = analysis::SchemeCounts{r.tx[k], r.rx[k]};
        const auto formula = analysis::scheme_counts(r.scheme, sis[k], 3600.0, 100);
        auto c = cfg::parse_config(fmt(R"({ "duration_s": 3600, "topology": { "hops": 1 },
          "scheme": { "name": "%s", "si_s": %g, "measurement_interval_s": 36,
                      "measurement_phase_s": 18, "bundling": "none" } })",
                                       r.name, sis[k]));
        const auto t0 = Clock::now();
        const sim::RunTrace trace = sim::run(c.run_config());
        slowest = std::max(slowest, std::chrono::duration<double>(Clock::now() - t0).count());
        const auto sim = analysis::trace_counts(trace.nodes[1]);
        if (!(formula == want) || !(sim == want)) {
          v.pass = false;
          v.detail += fmt("%s/SI=%g formula=(%llu,%llu) sim=(%llu,%llu) want=(%llu,%llu); ", r.name,
                          sis[k], (unsigned long long)formula.n_tx, (unsigned long long)formula.n_rx,
                          (unsigned long long)sim.n_tx, (unsigned long long)sim.n_rx,
                          (unsigned long long)want.n_tx, (unsigned long long)want.n_rx);
        }
      }
    }
    if (slowest > 10.0) v.pass = false;
    if (v.pass) v.detail = fmt("12/12 cells, slowest trace %.3f s", slowest);
    return v;
  });

  criterion(3, "single-precision loss bounds", 1.0, [] {
    using precision::Rounding;
    // Worst case by construction, and the chopped fp32 ratio of a span pair
    // whose true ratio sits just above one.
    const precision::PrecisionLoss worst{-precision::kMachineEpsilon32, 0.0};
    const std::vector<double> in{9'000'001.0, 9'000'000.0};
    const double r64 = est::eval64(est::Formula::cumulative_ratio, in);
    const double r32 = est::eval32(est::Formula::cumulative_ratio, in, Rounding::chop).value();
    const auto empirical = precision::measure_loss(r64, 0.0, r32, 0.0);
    Verdict v;
    for (const auto& [label, loss] : {std::pair{"worst", worst}, std::pair{"chopped", empirical}}) {
      const double p1 = std::abs(precision::psi_error(loss, 1e6));   // microseconds
      const double p10 = std::abs(precision::psi_error(loss, 1e7));
      const bool ok = p1 >= 0.9 * 0.119 && p1 <= 1.3 * 0.119 && p10 >= 0.9 * 1.19 &&
                      p10 <= 1.3 * 1.19 && loss.eps_alpha < 0.0;
      v.pass = v.pass && ok;
      v.detail += fmt("%s: eps=%.3e |psi(1s)|=%.4f us |psi(10s)|=%.4f us; ", label, loss.eps_alpha,
                      p1, p10);
    }
    return v;
  });

  criterion(4, "estimator exactness on noise-free data", 10.0, [] {
    Verdict v;
    double worst_param = 0.0, worst_err = 0.0, worst_recent = 0.0;
    for (int hops : {1, 6}) {
      auto c = cfg::parse_config(fmt(R"({ "seed": 5, "duration_s": 600,
        "topology": { "hops": %d, "jitter_ns": 0, "propagation_ns": 0 },
        "clock": { "tick_ns": "fine", "drift": "constant" },
        "scheme": { "bundling": "self" } })", hops));
      const sim::RunTrace t = sim::run(c.run_config());
      // True per-link relation in ticks: child = ratio * parent + offset.
      for (int node = 1; node <= hops; ++node) {
        const auto& child = t.nodes[node];
        const auto& parent = t.nodes[child.parent];
        const double ratio = child.params.ratio / parent.params.ratio;
        const double offset = (child.params.offset - ratio * parent.params.offset) / child.tick_ns;
        est::RegressionWindow w(19), all(0);
        for (const auto& f : t.head_frames) {
          for (const auto& p : f.pairs) {
            if (p.node == node) {
              w.push(p.pair);
              all.push(p.pair);
            }
          }
        }
        // Interpolation through the widest baseline: relayed frames can sit 2 ms
        // apart, where the 1 ps tick floor alone moves the intercept by ~1e-7.
        const auto& ps = w.pairs();
        const ClockParams recent = est::rsp_estimate(ps[ps.size() - 2], ps.back());
        worst_recent = std::max({worst_recent, rel(recent.ratio, ratio), rel(recent.offset, offset)});
        const ClockParams got[] = {
            est::lsq_fit(w),
            est::rsp_estimate(*all.initial(), all.latest()),
            est::estimate(est::Method::cumulative, all),
        };
        for (const auto& g : got) {
          worst_param = std::max({worst_param, rel(g.ratio, ratio), rel(g.offset, offset)});
        }
        // The cumulative ratio on its own, child-over-parent orientation.
        const double cr = est::ratio_estimate_cumulative(est::swap_roles(*all.initial()),
                                                         est::swap_roles(all.latest()));
        worst_param = std::max(worst_param, rel(cr, ratio));
      }
      for (est::Method m : {est::Method::lsq, est::Method::rsp, est::Method::cumulative}) {
        for (const auto& o : analysis::refit(t, m, m == est::Method::rsp ? 2 : 19)) {
          if (o.outcome == sim::Outcome::ok) worst_err = std::max(worst_err, std::abs(o.error_s));
        }
      }
    }
    v.pass = worst_param < 1e-9 && worst_err < 1e-9;
    v.detail = fmt("max relative parameter error %.2e, max post-bootstrap |error| %.2e s"
                   " (two most recent pairs: %.2e)",
                   worst_param, worst_err, worst_recent);
    return v;
  });

  criterion(5, "least squares against extended-precision oracle", 30.0, [] {
    std::mt19937_64 g(2024);
    std::uniform_int_distribution<int> size(2, 64);
    std::uniform_real_distribution<double> skew(-100e-6, 100e-6), off(-2e9, 2e9);
    std::uniform_int_distribution<long long> start(0, 3'600'000'000LL), gap(1000, 10'000'000);
    std::uniform_int_distribution<int> jit(-30, 30);
    double worst_r = 0.0, worst_o = 0.0;
    for (int w = 0; w < 1000; ++w) {
      const int n = size(g);
      const double ratio = 1.0 + skew(g), offset = off(g);
      std::vector<est::TimestampPair> pairs;
      long long x = start(g);
      for (int i = 0; i < n; ++i) {
        x += gap(g);
        const Ticks y = static_cast<Ticks>(std::llround(ratio * x + offset)) + jit(g);
        pairs.push_back({y, x + jit(g) % 3, static_cast<std::uint64_t>(i + 1)});
      }
      const ClockParams p = est::lsq_fit(pairs);
      const oracle::Fit o = oracle::normal_equations(pairs);
      worst_r = std::max(worst_r, rel(p.ratio, o.ratio));
      worst_o = std::max(worst_o, std::abs(p.offset - o.offset) / oracle::offset_scale(o, pairs));
    }
    return Verdict{worst_r <= 1e-12 && worst_o <= 1e-12,
                   fmt("1000 windows: ratio rel %.2e, offset rel %.2e", worst_r, worst_o)};
  });

  criterion(6, "multi-hop translation round trips", 5.0, [] {
    std::mt19937_64 g(6);
    std::uniform_int_distribution<int> depth(1, 6);
    std::uniform_real_distribution<double> skew(-200e-6, 200e-6), off(-1e9, 1e9), t(0.0, 4e12);
    double worst = 0.0;  // in units of the allowed tolerance
    for (int i = 0; i < 10000; ++i) {
      const int j = depth(g);
      std::vector<ClockParams> layers;
      for (int k = 0; k < j; ++k) layers.push_back({1.0 + skew(g), off(g)});
      const double ref = t(g);
      double mag = std::abs(ref), v = ref;
      for (const auto& l : layers) {
        v = l.ratio * v + l.offset;
        mag = std::max(mag, std::abs(v));
      }
      const double back = est::multihop_to_head(layers, est::multihop_from_head(layers, ref));
      const double tol = j * oracle::ulp(mag);
      worst = std::max(worst, std::abs(back - ref) / tol);
    }
    return Verdict{worst <= 1.0, fmt("10^4 stacks, worst error %.3f of the per-hop ulp budget", worst)};
  });

  criterion(7, "microsecond accuracy and interior window optimum", 120.0, [] {
    double mae2 = 0.0, mae19 = 0.0, mae_all = 0.0, worst19 = 0.0;
    const int seeds = 10;
    for (int s = 1; s <= seeds; ++s) {
      auto c = cfg::parse_config(kDriftConfig);
      c.seed = static_cast<std::uint64_t>(s);
      const sim::RunTrace t = sim::run(c.run_config());
      const double m19 = analysis::accuracy_metrics(t).overall.mae_s;
      worst19 = std::max(worst19, m19);
      mae19 += m19 / seeds;
      mae2 += analysis::accuracy_metrics(analysis::replay(t, est::Method::lsq, 2)).overall.mae_s / seeds;
      mae_all += analysis::accuracy_metrics(analysis::replay(t, est::Method::lsq, 0)).overall.mae_s / seeds;
    }
    return Verdict{worst19 < 10e-6 && mae19 < mae2 && mae19 < mae_all,
                   fmt("MAE m=2 %.3f us, m=19 %.3f us, m=all %.3f us; worst seed at m=19 %.3f us",
                       mae2 * 1e6, mae19 * 1e6, mae_all * 1e6, worst19 * 1e6)};
  });

  criterion(8, "multi-hop degradation over depth", 300.0, [] {
    std::vector<double> mean(7, 0.0);
    const int seeds = 20;
    for (int s = 1; s <= seeds; ++s) {
      auto c = cfg::parse_config(R"({ "duration_s": 600, "topology": { "hops": 6 },
        "clock": { "drift": "random_walk", "walk_sigma_ppm": 0.01 },
        "scheme": { "bundling": "self", "window": 19 } })");
      c.seed = static_cast<std::uint64_t>(s);
      const auto m = mae_by_level(sim::run(c.run_config()), 6);
      for (int l = 1; l <= 6; ++l) mean[l] += m[l] / seeds;
    }
    Verdict v;
    for (int l = 1; l <= 6; ++l) {
      v.detail += fmt("%.3f%s", mean[l] * 1e6, l < 6 ? " " : " us");
      if (l > 1) {
        const double inc = mean[l] - mean[l - 1];
        if (!(inc >= 0.0) || inc > 5e-6) v.pass = false;
      }
    }
    return v;
  });

  criterion(9, "energy ratios against flooding", 10.0, [] {
    auto power = [](const char* scheme, const char* schedule) {
      auto c = cfg::parse_config(fmt(R"({ "duration_s": 600, "topology": { "hops": 1 },
        "scheme": { "name": "%s", "si_s": 1, "measurement_interval_s": 2,
                    "measurement_phase_s": 1, "bundle_size": 5, "bundling": "self" },
        "energy": { "schedule": "%s" } })", scheme, schedule));
      const auto ledger = analysis::energy_from_trace(sim::run(c.run_config()), c.energy);
      return ledger.find(1)->avg_power_w;
    };
    const double bats = power("bats", "scheduled");
    const double on = power("flooding", "always_on");
    const double lpl = power("flooding", "low_power");
    return Verdict{bats < 0.05 * on && bats < 0.16 * lpl,
                   fmt("BATS %.4f mW; always-on %.3f mW (%.2f%%); low-power %.3f mW (%.2f%%)",
                       bats * 1e3, on * 1e3, 100 * bats / on, lpl * 1e3, 100 * bats / lpl)};
  });

  criterion(10, "byte-identical reruns", 10.0, [] {
    const char* configs[] = {
        kDriftConfig,
        R"({ "seed": 3, "duration_s": 300, "topology": { "parents": [0, 1, 1, 3], "loss": 0.05 },
             "scheme": { "bundling": "all" } })",
        R"({ "seed": 4, "duration_s": 300, "topology": { "hops": 3 },
             "scheme": { "name": "flooding_rsp", "node_precision": "fp32" } })",
    };
    Verdict v;
    std::size_t bytes = 0;
    for (const char* text : configs) {
      std::string csv[2];
      for (auto& out : csv) {
        bats_config* cfg = nullptr;
        bats_run* run = nullptr;
        size_t need = 0;
        if (bats_config_parse(text, &cfg) != BATS_OK || bats_run_execute(cfg, &run) != BATS_OK ||
            bats_run_csv(run, nullptr, 0, &need) != BATS_OK) {
          bats_run_free(run);
          bats_config_free(cfg);
          return Verdict{false, bats_last_error()};
        }
        out.assign(need, '\0');
        bats_run_csv(run, out.data(), out.size(), &need);
        bats_run_free(run);
        bats_config_free(cfg);
      }
      bytes += csv[0].size();
      if (csv[0] != csv[1]) v.pass = false;
    }
    v.detail = fmt("3 configs, %zu CSV bytes per pass", bytes);
    return v;
  });

  return failures == 0 ? 0 : 1;
}
