#include "bats/estimators.hpp"

#include <string>
#include <vector>

#include "bats/error.hpp"

namespace bats::est {

bool RegressionWindow::push(const TimestampPair& p) {
  if (!pairs_.empty()) {
    const TimestampPair& last = pairs_.back();
    if (p.sync_index <= last.sync_index || p.t_child <= last.t_child ||
        p.t_parent <= last.t_parent) {
      return false;
    }
  }
  if (!initial_) initial_ = p;
  pairs_.push_back(p);
  if (capacity_ != 0 && pairs_.size() > capacity_) pairs_.pop_front();
  ++accepted_;
  return true;
}

ClockParams lsq_fit(std::span<const TimestampPair> pairs) {
  if (pairs.size() < 2) {
    fail(ErrorCode::insufficient_data, "least squares needs at least two pairs");
  }
  // Differences against the first pair are exact in int64 and small enough to
  // be exact in binary64, which keeps the centred sums well conditioned.
  const Ticks x0 = pairs.front().t_parent;
  const Ticks y0 = pairs.front().t_child;
  const double n = static_cast<double>(pairs.size());
  double mx = 0.0, my = 0.0;
  for (const auto& p : pairs) {
    mx += static_cast<double>(p.t_parent - x0);
    my += static_cast<double>(p.t_child - y0);
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : pairs) {
    const double dx = static_cast<double>(p.t_parent - x0) - mx;
    const double dy = static_cast<double>(p.t_child - y0) - my;
    sxx += dx * dx;
    sxy += dx * dy;
  }
  if (sxx == 0.0) {
    fail(ErrorCode::singular_system, "all parent timestamps are equal");
  }
  const double ratio = sxy / sxx;
  const double offset = (static_cast<double>(y0) - ratio * static_cast<double>(x0)) +
                        (my - ratio * mx);
  return ClockParams{ratio, offset};
}

ClockParams lsq_fit(const RegressionWindow& window) {
  std::vector<TimestampPair> v(window.pairs().begin(), window.pairs().end());
  return lsq_fit(v);
}

double ratio_estimate_cumulative(const TimestampPair& initial,
                                 const TimestampPair& latest) {
  const Ticks d_child = latest.t_child - initial.t_child;
  if (d_child == 0) {
    fail(ErrorCode::division_by_zero, "cumulative ratio: child timestamps coincide");
  }
  return static_cast<double>(latest.t_parent - initial.t_parent) /
         static_cast<double>(d_child);
}

ClockParams rsp_estimate(const TimestampPair& prev, const TimestampPair& cur) {
  const Ticks d_parent = cur.t_parent - prev.t_parent;
  if (d_parent == 0) {
    fail(ErrorCode::division_by_zero, "interpolation: parent timestamps coincide");
  }
  const double alpha =
      static_cast<double>(cur.t_child - prev.t_child) / static_cast<double>(d_parent);
  // Algebraically equal to the four-timestamp offset expression, without the
  // cancellation between two large products.
  const double beta = static_cast<double>(prev.t_child) -
                      alpha * static_cast<double>(prev.t_parent);
  return ClockParams{alpha, beta};
}

double rsp_logical(const ClockParams& params, double local) {
  return params.ratio * local + params.offset;
}

double eeascfr_update(double state, double local_now, double local_at_k,
                      double ratio_est) {
  if (!(ratio_est > 0.0)) {
    fail(ErrorCode::contract_violation, "ratio estimate must be positive");
  }
  if (local_now < local_at_k) {
    fail(ErrorCode::contract_violation, "logical clock update runs backwards");
  }
  return state + (local_now - local_at_k) / ratio_est;
}

double translate_child_to_parent(const ClockParams& params, double t_child) {
  if (!(params.ratio > 0.0)) {
    fail(ErrorCode::contract_violation, "translation needs a positive ratio");
  }
  return static_cast<double>((static_cast<long double>(t_child) - params.offset) /
                             params.ratio);
}

double translate_parent_to_child(const ClockParams& params, double t_parent) {
  if (!(params.ratio > 0.0)) {
    fail(ErrorCode::contract_violation, "translation needs a positive ratio");
  }
  return static_cast<double>(static_cast<long double>(params.ratio) * t_parent +
                             params.offset);
}

namespace {
void check_layers(std::span<const ClockParams> layers) {
  if (layers.empty()) {
    fail(ErrorCode::contract_violation, "multi-hop translation needs at least one layer");
  }
  for (const auto& l : layers) {
    if (!(l.ratio > 0.0)) {
      fail(ErrorCode::contract_violation, "multi-hop translation needs positive ratios");
    }
  }
}
}  // namespace

double multihop_to_head(std::span<const ClockParams> layers, double t_at_layer) {
  check_layers(layers);
  long double v = t_at_layer;
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
    v = (v - it->offset) / it->ratio;
  }
  return static_cast<double>(v);
}

double multihop_from_head(std::span<const ClockParams> layers, double t_reference) {
  check_layers(layers);
  long double v = t_reference;
  for (const auto& l : layers) {
    v = static_cast<long double>(l.ratio) * v + l.offset;
  }
  return static_cast<double>(v);
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::lsq: return "lsq";
    case Method::cumulative: return "cumulative";
    case Method::rsp: return "rsp";
  }
  return "?";
}

std::optional<Method> method_from_string(std::string_view s) {
  if (s == "lsq") return Method::lsq;
  if (s == "cumulative") return Method::cumulative;
  if (s == "rsp") return Method::rsp;
  return std::nullopt;
}

ClockParams estimate(Method method, const RegressionWindow& window) {
  if (window.size() < 2) {
    fail(ErrorCode::insufficient_data, "estimate needs at least two pairs");
  }
  const auto& pairs = window.pairs();
  switch (method) {
    case Method::lsq:
      return lsq_fit(window);
    case Method::rsp:
      return rsp_estimate(pairs[pairs.size() - 2], pairs.back());
    case Method::cumulative: {
      const TimestampPair& init = *window.initial();
      const TimestampPair& last = pairs.back();
      // child-per-parent orientation: swap roles so the parent span divides.
      const double ratio = ratio_estimate_cumulative(swap_roles(init), swap_roles(last));
      const double offset = static_cast<double>(last.t_child) -
                            ratio * static_cast<double>(last.t_parent);
      return ClockParams{ratio, offset};
    }
  }
  fail(ErrorCode::unsupported, "unknown estimation method");
}

bool EstimateSet::ingest(int node, const TimestampPair& pair) {
  auto [it, inserted] = entries_.try_emplace(node, Entry{RegressionWindow(capacity_), {}, 0});
  Entry& e = it->second;
  if (!e.window.push(pair)) {
    ++duplicates_;
    return false;
  }
  e.freshness = pair.sync_index;
  if (e.window.size() >= 2) e.params = estimate(method_, e.window);
  return true;
}

std::optional<ClockParams> EstimateSet::params(int node) const {
  auto it = entries_.find(node);
  if (it == entries_.end()) return std::nullopt;
  return it->second.params;
}

std::uint64_t EstimateSet::freshness(int node) const {
  auto it = entries_.find(node);
  return it == entries_.end() ? 0 : it->second.freshness;
}

const RegressionWindow* EstimateSet::window(int node) const {
  auto it = entries_.find(node);
  return it == entries_.end() ? nullptr : &it->second.window;
}

// ---------------------------------------------------------------------------
// Registered expressions, generic over binary64 and emulated binary32.

namespace {

template <class R>
R apply(Formula f, std::span<const R> a) {
  switch (f) {
    case Formula::cumulative_ratio: return a[0] / a[1];
    case Formula::rsp_ratio: return a[0] / a[1];
    case Formula::rsp_offset: return (a[0] * a[1] - a[2] * a[3]) / (a[1] - a[2]);
    case Formula::rsp_logical: return a[0] * a[2] + a[1];
    case Formula::eeascfr_update: return a[0] + a[1] / a[2];
    case Formula::child_to_parent: return (a[0] - a[2]) / a[1];
  }
  fail(ErrorCode::unsupported, "unknown formula");
}

void check_arity(Formula f, std::size_t n) {
  if (n != arity(f)) {
    fail(ErrorCode::contract_violation,
         "formula expects " + std::to_string(arity(f)) + " inputs, got " +
             std::to_string(n));
  }
}

}  // namespace

std::size_t arity(Formula f) {
  switch (f) {
    case Formula::cumulative_ratio:
    case Formula::rsp_ratio: return 2;
    case Formula::rsp_offset: return 4;
    case Formula::rsp_logical:
    case Formula::eeascfr_update:
    case Formula::child_to_parent: return 3;
  }
  return 0;
}

double eval64(Formula f, std::span<const double> inputs) {
  check_arity(f, inputs.size());
  const double* a = inputs.data();
  const double denom = [&] {
    switch (f) {
      case Formula::cumulative_ratio:
      case Formula::rsp_ratio: return a[1];
      case Formula::rsp_offset: return a[1] - a[2];
      case Formula::eeascfr_update:
      case Formula::child_to_parent: return f == Formula::eeascfr_update ? a[2] : a[1];
      case Formula::rsp_logical: return 1.0;
    }
    return 1.0;
  }();
  if (denom == 0.0) fail(ErrorCode::division_by_zero, "formula denominator is zero");
  return apply<double>(f, inputs);
}

precision::Float32Emu eval32(Formula f, std::span<const double> inputs,
                             precision::Rounding mode) {
  check_arity(f, inputs.size());
  return precision::eval32(
      [f](std::span<const precision::Float32Emu> a) { return apply(f, a); }, inputs,
      mode);
}

}  // namespace bats::est
