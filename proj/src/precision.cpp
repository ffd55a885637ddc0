#include "bats/precision.hpp"

#include <algorithm>
#include <cmath>

#include "bats/error.hpp"

namespace bats::precision {
namespace {

constexpr double kBinary32Limit = 0x1p128;

// Rounds s to binary32 when the exact value is s plus a residual whose sign is
// residual_sign (the residual is far below one binary32 ulp of s).
Float32Emu finish(double s, double residual_sign, Rounding mode) {
  Float32Emu r = round32(s, mode);
  if (mode == Rounding::chop && residual_sign != 0.0 &&
      static_cast<double>(r.value()) == s) {
    const bool toward_zero = (s > 0.0 && residual_sign < 0.0) ||
                             (s < 0.0 && residual_sign > 0.0);
    if (toward_zero) r = Float32Emu(std::nextafter(r.value(), 0.0f), mode);
  }
  return r;
}

// Knuth TwoSum: a + b == s + err exactly.
double two_sum_error(double a, double b, double s) {
  const double bv = s - a;
  const double av = s - bv;
  return (a - av) + (b - bv);
}

}  // namespace

Float32Emu round32(double x, Rounding mode) {
  if (!std::isfinite(x)) {
    fail(ErrorCode::contract_violation, "round32 requires a finite value");
  }
  if (x == 0.0) return Float32Emu(static_cast<float>(x), mode);
  const double mag = std::fabs(x);
  if (mag >= kBinary32Limit) {
    fail(ErrorCode::overflow, "value exceeds binary32 range");
  }
  int k = 0;
  std::frexp(mag, &k);  // mag = f * 2^k, f in [0.5, 1)
  // Exponent of one binary32 ulp at this magnitude (subnormals share 2^-149).
  const int quantum = std::max(k - 24, -149);
  const double scaled = std::ldexp(mag, -quantum);
  double units = std::floor(scaled);
  const double rem = scaled - units;
  if (mode == Rounding::nearest_even) {
    if (rem > 0.5 || (rem == 0.5 && std::fmod(units, 2.0) == 1.0)) units += 1.0;
  }
  const double rounded = std::ldexp(units, quantum);
  if (rounded >= kBinary32Limit) {
    fail(ErrorCode::overflow, "value rounds beyond binary32 range");
  }
  return Float32Emu(static_cast<float>(std::copysign(rounded, x)), mode);
}

int Float32Emu::sign() const { return std::signbit(value_) ? -1 : 1; }

double Float32Emu::fraction() const {
  if (value_ == 0.0f) return 0.0;
  int e = 0;
  return 2.0 * std::frexp(std::fabs(static_cast<double>(value_)), &e);
}

int Float32Emu::exponent() const {
  if (value_ == 0.0f) return 0;
  int e = 0;
  std::frexp(static_cast<double>(value_), &e);
  return e - 1;
}

Float32Emu operator+(Float32Emu a, Float32Emu b) {
  const double x = a.value_, y = b.value_;
  const double s = x + y;
  return finish(s, two_sum_error(x, y, s), a.mode_);
}

Float32Emu operator-(Float32Emu a, Float32Emu b) { return a + (-b); }

Float32Emu operator*(Float32Emu a, Float32Emu b) {
  // 24 x 24 significand bits fit in binary64: the product is exact.
  return finish(static_cast<double>(a.value_) * static_cast<double>(b.value_),
                0.0, a.mode_);
}

Float32Emu operator/(Float32Emu a, Float32Emu b) {
  if (b.value_ == 0.0f) {
    fail(ErrorCode::division_by_zero, "binary32 division by zero");
  }
  const double x = a.value_, y = b.value_;
  const double q = x / y;
  const double r = std::fma(-q, y, x);  // exact remainder x - q*y
  const double residual_sign = (r == 0.0) ? 0.0 : ((r > 0.0) == (y > 0.0) ? 1.0 : -1.0);
  return finish(q, residual_sign, a.mode_);
}

double psi_error(const PrecisionLoss& loss, double local_time) {
  return loss.eps_alpha * local_time + loss.eps_beta;
}

PrecisionLoss measure_loss(double alpha64, double beta64, double alpha32,
                           double beta32) {
  return PrecisionLoss{alpha32 - alpha64, beta32 - beta64};
}

}  // namespace bats::precision
