#pragma once

#include <span>
#include <vector>

namespace bats::precision {

enum class Rounding { nearest_even, chop };

// Unit roundoff of the binary32 significand (23 stored fraction bits).
constexpr double kMachineEpsilon32 = 0x1p-23;

// A binary32 value together with the rounding mode its arithmetic follows.
// +, -, *, / are correctly rounded in that mode: the exact result is formed
// in binary64 (with an error-free residual where needed) and rounded once.
class Float32Emu {
 public:
  Float32Emu() = default;
  Float32Emu(float value, Rounding mode) : value_(value), mode_(mode) {}

  float value() const { return value_; }
  Rounding mode() const { return mode_; }
  explicit operator double() const { return value_; }

  // x = sign * fraction * 2^exponent with fraction in [1, 2); zero decomposes
  // to (+1, 0, 0).
  int sign() const;
  double fraction() const;
  int exponent() const;

  friend Float32Emu operator+(Float32Emu a, Float32Emu b);
  friend Float32Emu operator-(Float32Emu a, Float32Emu b);
  friend Float32Emu operator*(Float32Emu a, Float32Emu b);
  friend Float32Emu operator/(Float32Emu a, Float32Emu b);
  Float32Emu operator-() const { return Float32Emu(-value_, mode_); }

 private:
  float value_ = 0.0f;
  Rounding mode_ = Rounding::nearest_even;
};

// Rounds a finite binary64 value to binary32. Throws overflow when x lies
// beyond the binary32 range and contract_violation for non-finite input.
Float32Emu round32(double x, Rounding mode = Rounding::nearest_even);

// Limited-precision deviation of an estimate: low-precision result minus the
// binary64 result, for the ratio and the offset.
struct PrecisionLoss {
  double eps_alpha = 0.0;
  double eps_beta = 0.0;
};

// Estimated-time deviation eps_alpha * T + eps_beta at local time T.
double psi_error(const PrecisionLoss& loss, double local_time);

PrecisionLoss measure_loss(double alpha64, double beta64, double alpha32,
                           double beta32);

// Evaluates `expr` with every input and intermediate rounded to binary32.
// `expr` receives the rounded inputs as std::span<const Float32Emu>.
template <class Expr>
Float32Emu eval32(Expr&& expr, std::span<const double> inputs,
                  Rounding mode = Rounding::nearest_even) {
  std::vector<Float32Emu> args;
  args.reserve(inputs.size());
  for (double x : inputs) args.push_back(round32(x, mode));
  return expr(std::span<const Float32Emu>(args));
}

}  // namespace bats::precision
