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

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "lshtrain/sparse_data.hpp"

namespace lshtrain::testing {

inline std::vector<float> normal_vector(std::mt19937_64& gen, std::size_t n, float scale = 1.0f) {
  std::normal_distribution<float> d(0.0f, scale);
  std::vector<float> v(n);
  for (float& x : v) x = d(gen);
  return v;
}

// `count` distinct sorted indices below `dim`.
inline std::vector<std::uint32_t> distinct_indices(std::mt19937_64& gen, std::size_t dim, std::size_t count) {
  std::vector<std::uint32_t> all(dim);
  for (std::size_t i = 0; i < dim; ++i) all[i] = static_cast<std::uint32_t>(i);
  std::shuffle(all.begin(), all.end(), gen);
  all.resize(std::min(count, dim));
  std::sort(all.begin(), all.end());
  return all;
}

inline std::size_t uniform_size(std::mt19937_64& gen, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(gen);
}

// Every example has at least one label or feature so it has a text form.
inline SparseBatch random_batch(std::mt19937_64& gen, std::size_t examples, std::size_t input_dim,
                                std::size_t label_dim, std::size_t max_nnz = 12, std::size_t max_labels = 3) {
  std::vector<std::uint32_t> idx, lab;
  std::vector<float> val;
  std::vector<std::size_t> off{0}, loff{0};
  std::normal_distribution<float> d(0.0f, 2.0f);
  for (std::size_t e = 0; e < examples; ++e) {
    const std::size_t nl = uniform_size(gen, 1, max_labels);
    for (std::uint32_t l : distinct_indices(gen, label_dim, nl)) lab.push_back(l);
    for (std::uint32_t j : distinct_indices(gen, input_dim, uniform_size(gen, 0, max_nnz))) {
      idx.push_back(j);
      val.push_back(d(gen));
    }
    off.push_back(idx.size());
    loff.push_back(lab.size());
  }
  return SparseBatch(std::move(idx), std::move(val), std::move(off), std::move(lab), std::move(loff), input_dim,
                     label_dim);
}

}  // namespace lshtrain::testing
