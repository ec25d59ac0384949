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

#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace lshtrain {

// 16-bit brain float: the high half of an IEEE binary32 pattern
// (1 sign, 8 exponent, 7 mantissa bits).
struct Bf16 {
  std::uint16_t bits = 0;

  friend constexpr bool operator==(Bf16, Bf16) = default;
};

enum class Bf16Rounding : std::uint8_t { Truncate, NearestEven };

// Truncating conversion. A NaN whose surviving mantissa bits are all zero
// gets its quiet bit set so it does not turn into an infinity.
constexpr Bf16 from_fp32(float x) noexcept {
  const std::uint32_t u = std::bit_cast<std::uint32_t>(x);
  auto hi = static_cast<std::uint16_t>(u >> 16);
  if ((u & 0x7F800000u) == 0x7F800000u && (u & 0x007FFFFFu) != 0 && (hi & 0x007Fu) == 0) {
    hi |= 0x0040u;
  }
  return Bf16{hi};
}

// Round-to-nearest-even variant, kept for comparison runs.
constexpr Bf16 from_fp32_rne(float x) noexcept {
  const std::uint32_t u = std::bit_cast<std::uint32_t>(x);
  if ((u & 0x7F800000u) == 0x7F800000u) return from_fp32(x);
  const std::uint32_t bias = 0x7FFFu + ((u >> 16) & 1u);
  return Bf16{static_cast<std::uint16_t>((u + bias) >> 16)};
}

constexpr Bf16 from_fp32(float x, Bf16Rounding r) noexcept {
  return r == Bf16Rounding::Truncate ? from_fp32(x) : from_fp32_rne(x);
}

constexpr float to_fp32(Bf16 b) noexcept {
  return std::bit_cast<float>(static_cast<std::uint32_t>(b.bits) << 16);
}

// Value after a store/load through bf16.
constexpr float round_trip(float x, Bf16Rounding r = Bf16Rounding::Truncate) noexcept {
  return to_fp32(from_fp32(x, r));
}

void quantize_in_place(std::span<float> values, Bf16Rounding r = Bf16Rounding::Truncate) noexcept;
void to_bf16(std::span<const float> in, std::span<Bf16> out, Bf16Rounding r = Bf16Rounding::Truncate);
void to_fp32(std::span<const Bf16> in, std::span<float> out);

// Training-time precision policy.
//   WeightsAndActivations: weight master copy stored as bf16, activations
//     quantized at layer boundaries, optimizer moments stay fp32.
//   ActivationsOnly: activations quantized, everything else fp32.
//   None: fp32 throughout.
enum class QuantMode : std::uint8_t { WeightsAndActivations, ActivationsOnly, None };

// Config spellings: "both", "activations", "none".
QuantMode parse_quant_mode(std::string_view s);
std::string_view to_string(QuantMode m) noexcept;
Bf16Rounding parse_bf16_rounding(std::string_view s);
std::string_view to_string(Bf16Rounding r) noexcept;

constexpr bool quantizes_weights(QuantMode m) noexcept { return m == QuantMode::WeightsAndActivations; }
constexpr bool quantizes_activations(QuantMode m) noexcept { return m != QuantMode::None; }

}  // namespace lshtrain
