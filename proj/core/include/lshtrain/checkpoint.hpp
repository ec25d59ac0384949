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

// Binary model checkpoints, little-endian:
//
//   char[8]  "LSHTCKPT"
//   u32      format version (1)
//   u32      layer count
//   per layer:
//     u64 n, u64 m
//     u8 storage order (0 row-major, 1 column-major)
//     u8 precision (0 fp32, 1 bf16)
//     u8 activation (0 relu, 1 softmax)
//     u8 reserved (0)
//     n*m weights in storage order (4 or 2 bytes each)
//     n fp32 biases
//
// Hash tables are not stored; they are rebuilt from the weights on load.

#include <filesystem>
#include <iosfwd>

#include "lshtrain/nn.hpp"

namespace lshtrain {

inline constexpr char kCheckpointMagic[8] = {'L', 'S', 'H', 'T', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Network& net, std::ostream& out);
void save_checkpoint(const Network& net, const std::filesystem::path& path);

// Loads weights into a network of the same shape. Values are converted to
// the network's current precision. Throws FormatError on a bad header or a
// shape mismatch.
void load_checkpoint(Network& net, std::istream& in);
void load_checkpoint(Network& net, const std::filesystem::path& path);

}  // namespace lshtrain
