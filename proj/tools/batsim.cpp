// batsim: command-line front end over the C API.
#include <cinttypes>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "bats/bats.h"

namespace {

int report(bats_status s) {
  if (s != BATS_OK) {
    std::fprintf(stderr, "batsim: %s: %s\n", bats_status_string(s), bats_last_error());
  }
  return static_cast<int>(s);
}

bool parse_window(const std::string& text, uint32_t& out) {
  if (text == "all") {
    out = 0;
    return true;
  }
  try {
    std::size_t used = 0;
    const unsigned long v = std::stoul(text, &used);
    if (used != text.size() || v == 1 || v > UINT32_MAX) return false;
    out = static_cast<uint32_t>(v);
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

struct RunArgs {
  std::string config;
  std::string csv = "trace.csv";
  std::string json = "summary.json";
  std::string events;
  std::string window;
  uint64_t seed = 0;
  bool seed_set = false;
};

int cmd_run(const RunArgs& a) {
  bats_config* cfg = nullptr;
  bats_status s = bats_config_load(a.config.c_str(), &cfg);
  if (s != BATS_OK) return report(s);
  if (a.seed_set) s = bats_config_set_seed(cfg, a.seed);
  if (s == BATS_OK && !a.window.empty()) {
    uint32_t w = 0;
    if (!parse_window(a.window, w)) {
      std::fprintf(stderr, "batsim: --window takes an integer >= 2 or 'all'\n");
      bats_config_free(cfg);
      return BATS_ERR_INVALID_ARGUMENT;
    }
    s = bats_config_set_window(cfg, w);
  }
  bats_run* run = nullptr;
  if (s == BATS_OK) s = bats_run_execute(cfg, &run);
  if (s == BATS_OK && !a.csv.empty()) s = bats_run_write_csv(run, a.csv.c_str());
  if (s == BATS_OK && !a.json.empty()) s = bats_run_write_summary(run, a.json.c_str());
  if (s == BATS_OK && !a.events.empty()) s = bats_run_write_events(run, a.events.c_str());
  bats_run_free(run);
  bats_config_free(cfg);
  return report(s);
}

int cmd_sweep(const std::string& config, const std::string& csv) {
  bats_config* cfg = nullptr;
  bats_status s = bats_config_load(config.c_str(), &cfg);
  if (s == BATS_OK) s = bats_sweep_execute(cfg, csv.c_str());
  bats_config_free(cfg);
  return report(s);
}

int cmd_replay(const std::string& trace, const std::string& estimator,
               const std::string& window, const std::string& json, const std::string& csv) {
  uint32_t w = 0;
  if (!parse_window(window, w)) {
    std::fprintf(stderr, "batsim: --window takes an integer >= 2 or 'all'\n");
    return BATS_ERR_INVALID_ARGUMENT;
  }
  bats_run* run = nullptr;
  bats_status s = bats_replay_load(trace.c_str(), estimator.c_str(), w, &run);
  if (s == BATS_OK && !json.empty()) s = bats_run_write_summary(run, json.c_str());
  if (s == BATS_OK && !csv.empty()) s = bats_run_write_csv(run, csv.c_str());
  bats_run_free(run);
  return report(s);
}

int cmd_count(const std::string& formula, int hops, uint64_t m, const std::string& mode,
              double si, double duration, uint64_t measurements) {
  uint64_t out = 0;
  bats_status s = BATS_OK;
  if (formula == "conventional") {
    s = bats_count_conventional(hops, m, &out);
    if (s == BATS_OK) std::printf("conventional hops=%d m=%" PRIu64 " messages=%" PRIu64 "\n",
                                  hops, m, out);
  } else if (formula == "proposed") {
    const bats_bundling b = mode == "all" ? BATS_BUNDLING_ALL
                            : mode == "self" ? BATS_BUNDLING_SELF
                                             : BATS_BUNDLING_NONE;
    s = bats_count_proposed(hops, b, &out);
    if (s == BATS_OK) std::printf("proposed hops=%d mode=%s messages=%" PRIu64 "\n", hops,
                                  mode.c_str(), out);
  } else {
    const char* schemes[] = {"conventional_two_way", "flooding", "reverse_two_way", "bats"};
    const double sis[] = {1.0, 10.0, 100.0};
    std::printf("scheme,si_s,n_tx,n_rx\n");
    for (const char* scheme : schemes) {
      for (double v : sis) {
        if (si > 0.0 && v != si) continue;
        uint64_t tx = 0, rx = 0;
        s = bats_scheme_counts(scheme, si > 0.0 ? si : v, duration, measurements, &tx, &rx);
        if (s != BATS_OK) return report(s);
        std::printf("%s,%g,%" PRIu64 ",%" PRIu64 "\n", scheme, v, tx, rx);
      }
    }
  }
  return report(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulator for beaconless, head-side time synchronisation in sensor networks"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run one experiment; write the trace CSV and JSON summary");
  run->add_option("-c,--config", run_args.config, "Config file")->required()->check(CLI::ExistingFile);
  auto* seed_opt = run->add_option("--seed", run_args.seed, "Override the config seed");
  run->add_option("--window", run_args.window, "Override the regression window (n or 'all')");
  run->add_option("--csv", run_args.csv, "Trace CSV path ('-' for stdout, '' to skip)")->capture_default_str();
  run->add_option("--json", run_args.json, "Summary JSON path ('-' for stdout, '' to skip)")->capture_default_str();
  run->add_option("--events", run_args.events, "Event log path (needs record_events)");

  std::string sweep_config, sweep_csv = "-";
  auto* sweep = app.add_subcommand("sweep", "Run the config's sweep grid into a CSV table");
  sweep->add_option("-c,--config", sweep_config, "Config file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--csv", sweep_csv, "Output path ('-' for stdout)")->capture_default_str();

  std::string formula = "schemes", mode = "self";
  int hops = 1;
  uint64_t m = 0, measurements = 100;
  double si = 0.0, duration = 3600.0;
  auto* count = app.add_subcommand("count", "Closed-form message counts");
  count->add_option("formula", formula, "conventional | proposed | schemes")->capture_default_str()
      ->check(CLI::IsMember({"conventional", "proposed", "schemes"}));
  count->add_option("--hops", hops, "Hop count n")->capture_default_str();
  count->add_option("-m", m, "Measurements per hop (conventional)")->capture_default_str();
  count->add_option("--mode", mode, "Bundling for proposed: self | all")->capture_default_str()
      ->check(CLI::IsMember({"self", "all"}));
  count->add_option("--si", si, "schemes: single SI in seconds (default: 1, 10 and 100)");
  count->add_option("--duration", duration, "schemes: duration in seconds")->capture_default_str();
  count->add_option("--measurements", measurements, "schemes: measurements")->capture_default_str();

  std::string trace, estimator = "lsq", window = "19", replay_json = "-", replay_csv;
  auto* replay = app.add_subcommand("replay", "Re-fit the head estimator on a stored trace");
  replay->add_option("-t,--trace", trace, "Trace CSV from 'run'")->required()->check(CLI::ExistingFile);
  replay->add_option("--estimator", estimator, "lsq | cumulative | rsp")->capture_default_str()
      ->check(CLI::IsMember({"lsq", "cumulative", "rsp"}));
  replay->add_option("--window", window, "Regression window (n or 'all')")->capture_default_str();
  replay->add_option("--json", replay_json, "Summary JSON path ('-' for stdout)")->capture_default_str();
  replay->add_option("--csv", replay_csv, "Re-fitted trace CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : BATS_ERR_INVALID_ARGUMENT;
  }
  run_args.seed_set = seed_opt->count() > 0;

  if (*run) return cmd_run(run_args);
  if (*sweep) return cmd_sweep(sweep_config, sweep_csv);
  if (*count) return cmd_count(formula, hops, m, mode, si, duration, measurements);
  return cmd_replay(trace, estimator, window, replay_json, replay_csv);
}
