#pragma once

#include <compare>
#include <cstdint>
#include <vector>

#include "bats/rng.hpp"

namespace bats {

constexpr std::int64_t kNanosPerSecond = 1'000'000'000;
constexpr std::int64_t kNanosPerMicro = 1'000;

// Simulation reference time, integer nanoseconds since the run epoch.
struct SimTime {
  std::int64_t ns = 0;

  static constexpr SimTime from_seconds(double s) {
    return SimTime{static_cast<std::int64_t>(s * 1e9 + (s >= 0 ? 0.5 : -0.5))};
  }
  static constexpr SimTime from_micros(std::int64_t us) {
    return SimTime{us * kNanosPerMicro};
  }
  constexpr double seconds() const { return static_cast<double>(ns) * 1e-9; }

  constexpr SimTime operator+(std::int64_t dns) const { return SimTime{ns + dns}; }
  constexpr std::int64_t operator-(SimTime o) const { return ns - o.ns; }
  auto operator<=>(const SimTime&) const = default;
};

// Local clock reading, in the owning clock's tick unit.
using Ticks = std::int64_t;

// Frequency ratio and offset of an affine clock relation y = ratio * x + offset.
// For a hardware clock x is reference time and offset is in nanoseconds; for an
// estimate between two nodes x and y are parent and child ticks.
struct ClockParams {
  double ratio = 1.0;
  double offset = 0.0;

  double skew() const { return ratio - 1.0; }
  bool operator==(const ClockParams&) const = default;
};

enum class DriftKind { constant, random_walk };

struct DriftModel {
  DriftKind kind = DriftKind::constant;
  double walk_sigma_ppm = 0.0;  // ppm per sqrt(second)
  double bound_ppm = 500.0;     // random-walk skew is clamped to +-bound
  std::int64_t step_ns = kNanosPerSecond;  // lazy drift update granularity

  bool is_static() const {
    return kind == DriftKind::constant || walk_sigma_ppm == 0.0;
  }
};

// Tick sizes in nanoseconds.
constexpr double kSoftwareTimerTickNs = 1000.0;
constexpr double kCrystalTickNs = 30500.0;
// Picosecond counters; stands in for "no quantization" in exactness runs.
constexpr double kFineTickNs = 0.001;

// Affine-plus-drift hardware clock. The reading at reference time t is
// floor(phase(t) / tick) where phase is piecewise affine in t: each drift
// segment carries its own skew, and the phase is continuous across segments.
class HardwareClock {
 public:
  HardwareClock(ClockParams params, DriftModel drift,
                double tick_ns = kSoftwareTimerTickNs, std::uint64_t seed = 0);

  // Counter-register read. Throws contract_violation when t precedes the
  // previous read on this clock.
  Ticks read(SimTime t);

  // Evaluates the trajectory at t without the read-ordering contract. Used
  // for interrupt-time stamping where jitter may reorder nearby samples.
  Ticks ticks_at(SimTime t);

  // Unquantized local time in nanoseconds.
  double phase_ns_at(SimTime t);

  // Closes the current drift segment after dt and perturbs the skew by
  // N(0, sigma^2 dt). No-op for static drift models.
  void advance_drift(std::int64_t dt_ns);

  ClockParams params_at(SimTime t);
  ClockParams current_params() const;
  const ClockParams& initial_params() const { return initial_; }
  const DriftModel& drift() const { return drift_; }
  double tick_ns() const { return tick_ns_; }
  std::size_t segment_count() const { return segments_.size(); }

 private:
  struct Segment {
    std::int64_t start_ns;
    double phase_ns;  // local time at start_ns
    double skew;      // ratio - 1 within the segment
  };

  const Segment& segment_for(SimTime t);

  ClockParams initial_;
  DriftModel drift_;
  double tick_ns_;
  RngStream rng_;
  std::vector<Segment> segments_;
  std::int64_t last_read_ns_ = -1;
};

}  // namespace bats
