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

#include "lshtrain/synthetic.hpp"

#include <algorithm>
#include <vector>

#include "lshtrain/error.hpp"
#include "lshtrain/rng.hpp"

namespace lshtrain {

namespace {
constexpr std::uint64_t kPrototypeStream = 0x9707;
constexpr std::uint64_t kExampleStream = 0xE8A3;
}  // namespace

void SyntheticSpec::validate() const {
  if (input_dim == 0 || label_dim == 0) throw ConfigError("synthetic input_dim and label_dim must be positive");
  if (nnz == 0 || nnz > input_dim) throw ConfigError("synthetic nnz must be in [1, input_dim]");
  if (labels_per_example == 0 || labels_per_example > label_dim) {
    throw ConfigError("synthetic labels_per_example must be in [1, label_dim]");
  }
  if (prototype_size > input_dim) throw ConfigError("synthetic prototype_size exceeds input_dim");
  if (!(noise >= 0.0 && noise <= 1.0)) throw ConfigError("synthetic noise must be in [0, 1]");
}

SparseBatch generate_synthetic(const SyntheticSpec& spec, std::uint64_t stream) {
  spec.validate();
  const std::size_t proto = std::min(spec.input_dim, spec.prototype_size ? spec.prototype_size : 2 * spec.nnz);

  std::vector<std::uint32_t> proto_features(spec.label_dim * proto);
  std::vector<float> proto_weights(spec.label_dim * proto);
  {
    SplitMix64 rng(derive_seed(spec.seed, kPrototypeStream));
    std::vector<std::uint8_t> used(spec.input_dim, 0);
    for (std::size_t c = 0; c < spec.label_dim; ++c) {
      for (std::size_t k = 0; k < proto; ++k) {
        std::uint32_t f;
        do {
          f = static_cast<std::uint32_t>(uniform_below(rng, spec.input_dim));
        } while (used[f]);
        used[f] = 1;
        proto_features[c * proto + k] = f;
        proto_weights[c * proto + k] = 0.5f + uniform_unit(rng);
      }
      for (std::size_t k = 0; k < proto; ++k) used[proto_features[c * proto + k]] = 0;
    }
  }

  std::vector<std::uint32_t> indices, labels;
  std::vector<float> values;
  std::vector<std::size_t> offsets{0}, label_offsets{0};
  indices.reserve(spec.num_examples * spec.nnz);
  values.reserve(spec.num_examples * spec.nnz);

  SplitMix64 rng(derive_seed(spec.seed, kExampleStream, stream));
  std::vector<std::uint8_t> used(spec.input_dim, 0);
  std::vector<std::pair<std::uint32_t, float>> feats;
  std::vector<std::uint32_t> ex_labels;
  const std::size_t stride = std::max<std::size_t>(1, spec.label_dim / spec.labels_per_example);
  for (std::size_t e = 0; e < spec.num_examples; ++e) {
    const std::size_t c = uniform_below(rng, spec.label_dim);
    ex_labels.clear();
    for (std::size_t s = 0; s < spec.labels_per_example; ++s) {
      auto l = static_cast<std::uint32_t>((c + s * stride) % spec.label_dim);
      while (std::find(ex_labels.begin(), ex_labels.end(), l) != ex_labels.end()) {
        l = static_cast<std::uint32_t>((l + 1) % spec.label_dim);
      }
      ex_labels.push_back(l);
    }
    std::sort(ex_labels.begin(), ex_labels.end());
    labels.insert(labels.end(), ex_labels.begin(), ex_labels.end());
    label_offsets.push_back(labels.size());

    feats.clear();
    std::size_t proto_misses = 0;
    while (feats.size() < spec.nnz) {
      std::uint32_t f;
      float v;
      if (uniform_unit(rng) >= spec.noise && proto_misses < 8 * proto) {
        const std::size_t k = uniform_below(rng, proto);
        f = proto_features[c * proto + k];
        v = proto_weights[c * proto + k] * (0.75f + 0.5f * uniform_unit(rng));
        if (used[f]) {
          ++proto_misses;
          continue;
        }
      } else {
        f = static_cast<std::uint32_t>(uniform_below(rng, spec.input_dim));
        v = 0.05f + 0.95f * uniform_unit(rng);
        if (used[f]) continue;
      }
      used[f] = 1;
      feats.emplace_back(f, v);
    }
    std::sort(feats.begin(), feats.end());
    for (const auto& [f, v] : feats) {
      used[f] = 0;
      indices.push_back(f);
      values.push_back(v);
    }
    offsets.push_back(indices.size());
  }
  return SparseBatch(std::move(indices), std::move(values), std::move(offsets), std::move(labels),
                     std::move(label_offsets), spec.input_dim, spec.label_dim);
}

}  // namespace lshtrain
