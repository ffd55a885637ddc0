#include <gtest/gtest.h>

#include <cfloat>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <vector>

#include "bats/error.hpp"
#include "bats/estimators.hpp"
#include "bats/precision.hpp"

using namespace bats;
using namespace bats::precision;

TEST(Round32, Examples) {
  EXPECT_EQ(round32(1.0).value(), 1.0f);
  EXPECT_EQ(round32(1.0 + 0x1p-24).value(), 1.0f);
  EXPECT_EQ(round32(16777217.0).value(), 16777216.0f);
}

TEST(Round32, OverflowAndNonFinite) {
  try {
    round32(1e39);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::overflow);
  }
  EXPECT_THROW(round32(std::nan("")), Error);
  EXPECT_THROW(round32(INFINITY), Error);
  EXPECT_EQ(round32(static_cast<double>(FLT_MAX), Rounding::chop).value(), FLT_MAX);
}

TEST(Round32, NearestMatchesHardwareConversion) {
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> mant(-1.0, 1.0);
  std::uniform_int_distribution<int> ex(-140, 120);
  for (int i = 0; i < 200000; ++i) {
    const double x = std::ldexp(mant(g), ex(g));
    const float want = static_cast<float>(x);
    const float got = round32(x).value();
    std::uint32_t a, b;
    std::memcpy(&a, &want, 4);
    std::memcpy(&b, &got, 4);
    ASSERT_EQ(a, b) << x;
  }
}

TEST(Round32, ChopTruncatesTowardZero) {
  std::mt19937_64 g(6);
  std::uniform_real_distribution<double> d(-1e6, 1e6);
  for (int i = 0; i < 50000; ++i) {
    const double x = d(g);
    const double r = round32(x, Rounding::chop).value();
    ASSERT_LE(std::abs(r), std::abs(x));
    ASSERT_LT(std::abs(x - r), std::abs(r) * 0x1p-23 + 1e-300);
  }
}

TEST(Round32, Idempotent) {
  for (double x : {0.1, -3.3e-7, 123456.789, 1e30}) {
    for (Rounding m : {Rounding::nearest_even, Rounding::chop}) {
      const float once = round32(x, m).value();
      EXPECT_EQ(round32(once, m).value(), once);
    }
  }
}

TEST(Float32Emu, Decomposition) {
  const Float32Emu v(-6.0f, Rounding::nearest_even);
  EXPECT_EQ(v.sign(), -1);
  EXPECT_EQ(v.fraction(), 1.5);
  EXPECT_EQ(v.exponent(), 2);
  const Float32Emu z(0.0f, Rounding::chop);
  EXPECT_EQ(z.sign(), 1);
  EXPECT_EQ(z.fraction(), 0.0);
  EXPECT_EQ(z.exponent(), 0);
}

TEST(Float32Emu, NearestArithmeticMatchesNativeFloat) {
  std::mt19937 g(8);
  std::uniform_real_distribution<float> d(-1e4f, 1e4f);
  for (int i = 0; i < 50000; ++i) {
    const float a = d(g), b = d(g);
    const Float32Emu x(a, Rounding::nearest_even), y(b, Rounding::nearest_even);
    ASSERT_EQ((x + y).value(), a + b);
    ASSERT_EQ((x - y).value(), a - b);
    ASSERT_EQ((x * y).value(), a * b);
    if (b != 0.0f) {
      ASSERT_EQ((x / y).value(), a / b);
    }
  }
}

TEST(Float32Emu, ChopDivisionNeverExceedsExact) {
  std::mt19937 g(9);
  std::uniform_real_distribution<float> d(1.0f, 1e6f);
  for (int i = 0; i < 20000; ++i) {
    const float a = d(g), b = d(g);
    const double q = (Float32Emu(a, Rounding::chop) / Float32Emu(b, Rounding::chop)).value();
    // double division of floats is itself exact enough to compare against.
    ASSERT_LE(q, static_cast<double>(a) / b);
  }
}

TEST(PsiError, Examples) {
  const PrecisionLoss worst{0x1p-23, 0.0};
  EXPECT_NEAR(psi_error(worst, 1e6), 0.119, 0.0005);    // microseconds
  EXPECT_NEAR(psi_error(worst, 1e7), 1.19, 0.005);
  EXPECT_EQ(psi_error(PrecisionLoss{}, 1e7), 0.0);
}

TEST(MeasureLoss, IsLowMinusHigh) {
  const PrecisionLoss l = measure_loss(1.0, 10.0, 1.0 - 0x1p-23, 10.5);
  EXPECT_EQ(l.eps_alpha, -0x1p-23);
  EXPECT_EQ(l.eps_beta, 0.5);
}

TEST(Eval32, RepresentableRatioIsExact) {
  const std::vector<double> in{2000.0 - 1000.0, 3000.0 - 2000.0};
  EXPECT_EQ(est::eval32(est::Formula::cumulative_ratio, in).value(), 1.0f);
  EXPECT_EQ(est::eval64(est::Formula::cumulative_ratio, in), 1.0);
}

TEST(Eval32, DivisionByZeroSignals) {
  const std::vector<double> in{5.0, 0.0};
  try {
    est::eval32(est::Formula::cumulative_ratio, in);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::division_by_zero);
  }
  EXPECT_THROW(est::eval64(est::Formula::cumulative_ratio, in), Error);
}

TEST(Eval32, ArityIsChecked) {
  const std::vector<double> in{1.0};
  EXPECT_THROW(est::eval64(est::Formula::rsp_logical, in), Error);
  EXPECT_EQ(est::arity(est::Formula::rsp_offset), 4u);
}

TEST(Eval32, GenericTemplateRoundsInputs) {
  const std::vector<double> in{0.1, 0.2};
  const Float32Emu s = eval32([](auto a) { return a[0] + a[1]; }, std::span<const double>(in));
  EXPECT_EQ(s.value(), 0.1f + 0.2f);
}

// Worst-case skew loss through the fp32 ratio: with chopping and a ratio
// just above one the single-precision result sits almost an epsilon under it.
TEST(Eval32, ChoppedRatioLosesOneEpsilon) {
  const std::vector<double> in{9'000'001.0, 9'000'000.0};
  const double r64 = est::eval64(est::Formula::cumulative_ratio, in);
  const double r32 = est::eval32(est::Formula::cumulative_ratio, in, Rounding::chop).value();
  const PrecisionLoss l = measure_loss(r64, 0.0, r32, 0.0);
  EXPECT_LT(l.eps_alpha, 0.0);
  EXPECT_NEAR(std::abs(l.eps_alpha), 0x1p-23, 0x1p-23 * 0.15);
}
