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

// Learnable synthetic multi-label data. Each label owns a prototype set of
// features; an example picks a primary label, draws most of its features
// from that label's prototype and the rest uniformly at random.

#include <cstddef>
#include <cstdint>

#include "lshtrain/sparse_data.hpp"

namespace lshtrain {

struct SyntheticSpec {
  std::size_t num_examples = 2000;
  std::size_t input_dim = 1000;
  std::size_t label_dim = 500;
  std::size_t nnz = 20;                 // features per example
  std::size_t labels_per_example = 1;
  std::size_t prototype_size = 0;       // features per label prototype; 0 means 2 * nnz
  double noise = 0.2;                   // chance a feature ignores the prototype
  std::uint64_t seed = 1;

  // Throws ConfigError.
  void validate() const;
};

// Prototypes depend only on spec.seed; `stream` picks an independent run of
// examples over the same prototypes (e.g. 0 for train, 1 for test).
SparseBatch generate_synthetic(const SyntheticSpec& spec, std::uint64_t stream = 0);

}  // namespace lshtrain
