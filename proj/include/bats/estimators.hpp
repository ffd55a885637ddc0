#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string_view>

#include "bats/clock.hpp"
#include "bats/precision.hpp"

namespace bats::est {

// One send/receive stamp pair of a frame travelling child -> parent: the
// child's SFD send time and the parent's SFD receive time, each in its own
// clock's ticks. sync_index numbers the child's frames.
struct TimestampPair {
  Ticks t_child = 0;
  Ticks t_parent = 0;
  std::uint64_t sync_index = 0;

  bool operator==(const TimestampPair&) const = default;
};

// Exchanges the two clocks' roles, for schemes that estimate the inverse
// relation (e.g. a sensor estimating reference time from its own clock).
constexpr TimestampPair swap_roles(const TimestampPair& p) {
  return TimestampPair{p.t_parent, p.t_child, p.sync_index};
}

// Most recent `capacity` pairs of one child/parent link, oldest first.
// capacity 0 keeps every pair.
class RegressionWindow {
 public:
  explicit RegressionWindow(std::size_t capacity = 0) : capacity_(capacity) {}

  // Appends p. Returns false (and leaves the window unchanged) when p does not
  // advance the stream: a repeated or older sync_index, or non-increasing
  // timestamps.
  bool push(const TimestampPair& p);

  std::size_t size() const { return pairs_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return pairs_.empty(); }
  const std::deque<TimestampPair>& pairs() const { return pairs_; }
  const TimestampPair& latest() const { return pairs_.back(); }
  // First pair ever accepted, kept after eviction (cumulative-ratio anchor).
  const std::optional<TimestampPair>& initial() const { return initial_; }
  std::uint64_t accepted() const { return accepted_; }

 private:
  std::size_t capacity_;
  std::deque<TimestampPair> pairs_;
  std::optional<TimestampPair> initial_;
  std::uint64_t accepted_ = 0;
};

// Affine least-squares fit t_child = ratio * t_parent + offset, computed from
// centred sums. Throws insufficient_data (< 2 pairs) or singular_system (all
// t_parent equal).
ClockParams lsq_fit(std::span<const TimestampPair> pairs);
ClockParams lsq_fit(const RegressionWindow& window);

// (latest.t_parent - initial.t_parent) / (latest.t_child - initial.t_child).
double ratio_estimate_cumulative(const TimestampPair& initial,
                                 const TimestampPair& latest);

// Two-point interpolation through prev and cur, t_child = a * t_parent + b.
ClockParams rsp_estimate(const TimestampPair& prev, const TimestampPair& cur);

double rsp_logical(const ClockParams& params, double local);

// Frequency-only logical clock step with the offset term pinned to zero.
double eeascfr_update(double state, double local_now, double local_at_k,
                      double ratio_est);

double translate_child_to_parent(const ClockParams& params, double t_child);
double translate_parent_to_child(const ClockParams& params, double t_parent);

// layers[0] relates layer 1 to the head, layers[j-1] relates layer j to layer
// j-1. multihop_to_head undoes layers j..1 in turn; multihop_from_head applies
// 1..j. Intermediate values are carried in extended precision.
double multihop_to_head(std::span<const ClockParams> layers, double t_at_layer);
double multihop_from_head(std::span<const ClockParams> layers, double t_reference);

enum class Method {
  lsq,         // windowed least squares
  cumulative,  // ratio from the first pair ever to the latest, offset at latest
  rsp,         // interpolation over the two most recent pairs
};

std::string_view to_string(Method m);
std::optional<Method> method_from_string(std::string_view s);

// Estimate for a window under the given method. Throws like lsq_fit when the
// window cannot support an estimate.
ClockParams estimate(Method method, const RegressionWindow& window);

// Per-link estimates held by the head, keyed by the child node id.
class EstimateSet {
 public:
  EstimateSet(Method method, std::size_t window_capacity)
      : method_(method), capacity_(window_capacity) {}

  // Returns false for duplicates; the entry is then unchanged.
  bool ingest(int node, const TimestampPair& pair);

  // Null until the node's window holds two pairs with distinct t_parent.
  std::optional<ClockParams> params(int node) const;
  std::uint64_t freshness(int node) const;
  const RegressionWindow* window(int node) const;
  std::uint64_t duplicates() const { return duplicates_; }
  Method method() const { return method_; }
  std::size_t window_capacity() const { return capacity_; }

 private:
  struct Entry {
    RegressionWindow window;
    std::optional<ClockParams> params;
    std::uint64_t freshness = 0;
  };

  Method method_;
  std::size_t capacity_;
  std::map<int, Entry> entries_;
  std::uint64_t duplicates_ = 0;
};

// Estimator expressions available to limited-precision evaluation. Inputs are
// listed per formula; timestamp differences are formed in integer arithmetic
// by the caller, as a node would.
enum class Formula {
  cumulative_ratio,   // {d_parent, d_child}        -> d_parent / d_child
  rsp_ratio,          // {d_child, d_parent}        -> d_child / d_parent
  rsp_offset,         // {c_prev, p_cur, p_prev, c_cur}
                      //   -> (c_prev*p_cur - p_prev*c_cur) / (p_cur - p_prev)
  rsp_logical,        // {alpha, beta, local}       -> alpha * local + beta
  eeascfr_update,     // {state, elapsed, ratio}    -> state + elapsed / ratio
  child_to_parent,    // {t_child, ratio, offset}   -> (t_child - offset) / ratio
};

std::size_t arity(Formula f);

// Binary64 evaluation of the literal expression.
double eval64(Formula f, std::span<const double> inputs);

// Binary32 evaluation with every input and intermediate rounded.
precision::Float32Emu eval32(Formula f, std::span<const double> inputs,
                             precision::Rounding mode = precision::Rounding::nearest_even);

}  // namespace bats::est
