#pragma once

// Reference computations for the test suites, deliberately written without
// reusing library code paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "bats/estimators.hpp"

namespace oracle {

struct Fit {
  double ratio;
  double offset;
};

// Raw (uncentred) normal equations in binary128. Integer tick sums stay exact
// in the 113-bit significand, so only the two final divisions round.
inline Fit normal_equations(std::span<const bats::est::TimestampPair> pairs) {
  using q = __float128;
  q n = static_cast<q>(pairs.size());
  q sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& p : pairs) {
    const q x = static_cast<q>(p.t_parent), y = static_cast<q>(p.t_child);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const q ratio = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const q offset = (sy - ratio * sx) / n;
  return Fit{static_cast<double>(ratio), static_cast<double>(offset)};
}

// Tolerance for an offset whose fit spans parent values up to |x|max:
// relative to the size of the terms that cancel to form it.
inline double offset_scale(const Fit& f, std::span<const bats::est::TimestampPair> pairs) {
  double xmax = 0.0;
  for (const auto& p : pairs) xmax = std::max(xmax, std::abs(static_cast<double>(p.t_parent)));
  return std::abs(f.offset) + std::abs(f.ratio) * xmax;
}

inline double ulp(double x) {
  x = std::abs(x);
  return std::nextafter(x, INFINITY) - x;
}

}  // namespace oracle
