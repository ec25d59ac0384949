/* Copyright 2026 The lshtrain Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "lshtrain/quant.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "lshtrain/error.hpp"

namespace lshtrain {
namespace {

std::uint32_t bits(float x) { return std::bit_cast<std::uint32_t>(x); }

TEST(Bf16Test, OneIsExact) {
  EXPECT_EQ(from_fp32(1.0f).bits, 0x3F80);
  EXPECT_EQ(round_trip(1.0f), 1.0f);
}

TEST(Bf16Test, TruncatesLowMantissaBits) {
  EXPECT_EQ(round_trip(1.0f + 0x1p-8f), 1.0f);
  EXPECT_EQ(round_trip(1.0f + 0x1p-7f), 1.0f + 0x1p-7f);
  EXPECT_EQ(round_trip(-1.0f - 0x1p-8f - 0x1p-9f), -1.0f);
  // Against the bit-level definition: keep the top 16 bits.
  std::mt19937 gen(1);
  for (int rep = 0; rep < 10000; ++rep) {
    const std::uint32_t u = gen() & 0x7F7FFFFFu;  // finite
    const float x = std::bit_cast<float>(u);
    EXPECT_EQ(bits(round_trip(x)), u & 0xFFFF0000u);
  }
}

TEST(Bf16Test, NegativeZeroKeepsSign) {
  const float z = round_trip(-0.0f);
  EXPECT_EQ(z, 0.0f);
  EXPECT_TRUE(std::signbit(z));
}

TEST(Bf16Test, NanStaysNan) {
  // Truncating this NaN would leave infinity's pattern.
  const float quiet_low = std::bit_cast<float>(0x7F800001u);
  EXPECT_TRUE(std::isnan(quiet_low));
  EXPECT_TRUE(std::isnan(round_trip(quiet_low)));
  EXPECT_TRUE(std::isnan(round_trip(std::numeric_limits<float>::quiet_NaN())));
  EXPECT_TRUE(std::isnan(round_trip(quiet_low, Bf16Rounding::NearestEven)));
  EXPECT_EQ(round_trip(std::numeric_limits<float>::infinity()), std::numeric_limits<float>::infinity());
}

TEST(Bf16Test, EveryPatternRoundTrips) {
  for (std::uint32_t p = 0; p < 65536; ++p) {
    const Bf16 b{static_cast<std::uint16_t>(p)};
    ASSERT_EQ(from_fp32(to_fp32(b)).bits, b.bits) << p;
    ASSERT_EQ(from_fp32_rne(to_fp32(b)).bits, b.bits) << p;
  }
}

TEST(Bf16Test, RelativeErrorBoundOnNormals) {
  std::mt19937_64 gen(2);
  std::normal_distribution<float> d(0.0f, 10.0f);
  for (int rep = 0; rep < 100000; ++rep) {
    const float x = d(gen);
    if (x == 0.0f) continue;
    EXPECT_LE(std::abs(round_trip(x) - x) / std::abs(x), 0x1p-7f);
    EXPECT_LE(std::abs(round_trip(x, Bf16Rounding::NearestEven) - x) / std::abs(x), 0x1p-8f);
  }
}

TEST(Bf16Test, TruncationIsMonotone) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<float> d(1e-30f, 1e30f);
  for (int rep = 0; rep < 10000; ++rep) {
    float x = d(gen), y = d(gen);
    if (x > y) std::swap(x, y);
    EXPECT_LE(round_trip(x), round_trip(y));
    EXPECT_LE(round_trip(-y), round_trip(-x));
  }
}

TEST(Bf16Test, NearestEvenRounding) {
  // Halfway cases go to the even mantissa.
  EXPECT_EQ(round_trip(1.0f + 0x1p-8f, Bf16Rounding::NearestEven), 1.0f);
  EXPECT_EQ(round_trip(1.0f + 0x1p-7f + 0x1p-8f, Bf16Rounding::NearestEven), 1.0f + 0x1p-6f);
  EXPECT_EQ(round_trip(1.0f + 0x1p-8f + 0x1p-10f, Bf16Rounding::NearestEven), 1.0f + 0x1p-7f);
}

TEST(Bf16Test, SpanConversions) {
  const std::vector<float> x{1.5f, -2.25f, 3.0f + 0x1p-10f};
  std::vector<Bf16> b(3);
  to_bf16(x, b);
  std::vector<float> y(3);
  to_fp32(b, y);
  EXPECT_EQ(y, (std::vector<float>{1.5f, -2.25f, 3.0f}));
  std::vector<float> q = x;
  quantize_in_place(q);
  EXPECT_EQ(q, y);
  EXPECT_THROW(to_bf16(x, std::span<Bf16>(b).first(2)), DimensionError);
}

TEST(QuantModeTest, ParseAndPrint) {
  for (const char* s : {"both", "activations", "none"}) EXPECT_EQ(to_string(parse_quant_mode(s)), s);
  EXPECT_EQ(parse_quant_mode("both"), QuantMode::WeightsAndActivations);
  EXPECT_THROW(parse_quant_mode("fp16"), ConfigError);
  EXPECT_EQ(parse_bf16_rounding("nearest_even"), Bf16Rounding::NearestEven);
  EXPECT_THROW(parse_bf16_rounding("up"), ConfigError);
  EXPECT_TRUE(quantizes_weights(QuantMode::WeightsAndActivations));
  EXPECT_FALSE(quantizes_weights(QuantMode::ActivationsOnly));
  EXPECT_TRUE(quantizes_activations(QuantMode::ActivationsOnly));
  EXPECT_FALSE(quantizes_activations(QuantMode::None));
}

}  // namespace
}  // namespace lshtrain
