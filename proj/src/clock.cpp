#include "bats/clock.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bats/error.hpp"

namespace bats {

HardwareClock::HardwareClock(ClockParams params, DriftModel drift,
                             double tick_ns, std::uint64_t seed)
    : initial_(params), drift_(drift), tick_ns_(tick_ns), rng_(seed) {
  if (!(params.ratio > 0.0) || !std::isfinite(params.offset)) {
    fail(ErrorCode::contract_violation, "clock ratio must be positive");
  }
  if (std::abs(params.skew()) > drift.bound_ppm * 1e-6 * (1.0 + 1e-12)) {
    fail(ErrorCode::contract_violation,
         "clock skew exceeds +-" + std::to_string(drift.bound_ppm) + " ppm");
  }
  if (!(tick_ns > 0.0)) {
    fail(ErrorCode::contract_violation, "tick size must be positive");
  }
  if (drift.kind == DriftKind::random_walk &&
      (drift.walk_sigma_ppm < 0.0 || drift.step_ns <= 0)) {
    fail(ErrorCode::contract_violation, "invalid random-walk drift settings");
  }
  segments_.push_back(Segment{0, params.offset, params.skew()});
}

const HardwareClock::Segment& HardwareClock::segment_for(SimTime t) {
  if (t.ns < 0) {
    fail(ErrorCode::contract_violation, "negative simulation time");
  }
  if (!drift_.is_static()) {
    while (t.ns >= segments_.back().start_ns + drift_.step_ns) {
      advance_drift(drift_.step_ns);
    }
  }
  auto it = std::upper_bound(
      segments_.begin(), segments_.end(), t.ns,
      [](std::int64_t v, const Segment& s) { return v < s.start_ns; });
  return *std::prev(it);
}

double HardwareClock::phase_ns_at(SimTime t) {
  const Segment& seg = segment_for(t);
  const double dt = static_cast<double>(t.ns - seg.start_ns);
  // dt is an exact integer; adding the small skew term last keeps integral
  // phases integral under fp64 rounding.
  return dt + (seg.skew * dt + seg.phase_ns);
}

Ticks HardwareClock::ticks_at(SimTime t) {
  return static_cast<Ticks>(std::floor(phase_ns_at(t) / tick_ns_));
}

Ticks HardwareClock::read(SimTime t) {
  if (t.ns < last_read_ns_) {
    fail(ErrorCode::contract_violation,
         "clock read at " + std::to_string(t.ns) + " ns precedes previous read at " +
             std::to_string(last_read_ns_) + " ns");
  }
  last_read_ns_ = t.ns;
  return ticks_at(t);
}

void HardwareClock::advance_drift(std::int64_t dt_ns) {
  if (dt_ns <= 0) {
    fail(ErrorCode::contract_violation, "drift step must be positive");
  }
  if (drift_.is_static()) return;
  const Segment& last = segments_.back();
  const double dt = static_cast<double>(dt_ns);
  const double phase = last.phase_ns + dt + last.skew * dt;
  const double sigma = drift_.walk_sigma_ppm * 1e-6 * std::sqrt(dt * 1e-9);
  const double bound = drift_.bound_ppm * 1e-6;
  const double skew = std::clamp(last.skew + sigma * rng_.normal(), -bound, bound);
  segments_.push_back(Segment{last.start_ns + dt_ns, phase, skew});
}

ClockParams HardwareClock::params_at(SimTime t) {
  const Segment& seg = segment_for(t);
  // Affine form valid within the segment: phase = ratio * t + offset.
  const double ratio = 1.0 + seg.skew;
  return ClockParams{ratio, seg.phase_ns - ratio * static_cast<double>(seg.start_ns)};
}

ClockParams HardwareClock::current_params() const {
  const Segment& seg = segments_.back();
  const double ratio = 1.0 + seg.skew;
  return ClockParams{ratio, seg.phase_ns - ratio * static_cast<double>(seg.start_ns)};
}

}  // namespace bats
