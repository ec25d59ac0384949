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

#include <cstddef>

#include "lshtrain/error.hpp"

namespace lshtrain {

void quantize_in_place(std::span<float> values, Bf16Rounding r) noexcept {
  for (float& v : values) v = round_trip(v, r);
}

void to_bf16(std::span<const float> in, std::span<Bf16> out, Bf16Rounding r) {
  if (in.size() != out.size()) throw DimensionError("to_bf16: length mismatch");
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = from_fp32(in[i], r);
}

void to_fp32(std::span<const Bf16> in, std::span<float> out) {
  if (in.size() != out.size()) throw DimensionError("to_fp32: length mismatch");
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = to_fp32(in[i]);
}

QuantMode parse_quant_mode(std::string_view s) {
  if (s == "both") return QuantMode::WeightsAndActivations;
  if (s == "activations") return QuantMode::ActivationsOnly;
  if (s == "none") return QuantMode::None;
  throw ConfigError("bf16_mode must be one of both|activations|none, got '" + std::string(s) + "'");
}

std::string_view to_string(QuantMode m) noexcept {
  switch (m) {
    case QuantMode::WeightsAndActivations: return "both";
    case QuantMode::ActivationsOnly: return "activations";
    case QuantMode::None: return "none";
  }
  return "none";
}

Bf16Rounding parse_bf16_rounding(std::string_view s) {
  if (s == "truncate") return Bf16Rounding::Truncate;
  if (s == "nearest_even") return Bf16Rounding::NearestEven;
  throw ConfigError("bf16_rounding must be truncate|nearest_even, got '" + std::string(s) + "'");
}

std::string_view to_string(Bf16Rounding r) noexcept {
  return r == Bf16Rounding::Truncate ? "truncate" : "nearest_even";
}

}  // namespace lshtrain
