#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bats/analysis.hpp"
#include "bats/protocol.hpp"
#include "bats/simnet.hpp"

namespace bats::cfg {

struct SweepGrid {
  std::vector<double> si_s;
  std::vector<std::size_t> window;  // empty: per-SI default; 0 = all samples
  std::vector<int> hops;
  std::vector<proto::Scheme> scheme;
  std::vector<std::uint64_t> seeds;
  bool replay = true;  // head-side runs re-fit one trace per window
  unsigned threads = 0;  // 0: hardware concurrency
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  double duration_s = 3600.0;
  bool record_events = false;
  int hops = 1;
  std::vector<int> parents;  // non-empty: explicit tree, overrides hops
  sim::ClockConfig clock;
  sim::LinkConfig link;
  proto::SchemeConfig scheme;
  bool window_auto = true;  // window follows the SI default
  analysis::EnergyModel energy;
  std::optional<SweepGrid> sweep;

  // Resolves defaults and validates. Throws invalid_config.
  void finalize();
  sim::RunConfig run_config() const;
  // Stable hash of the canonical form.
  std::uint64_t hash() const;
  std::string canonical_json() const;
};

// Throws invalid_config on malformed text, wrong types, unknown keys or
// out-of-range values.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace bats::cfg
