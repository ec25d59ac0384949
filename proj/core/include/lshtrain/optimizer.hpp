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

// Lazy ADAM over contiguous layer buffers. Only entries that received a
// gradient in the current step are updated; every other weight and its
// moments are left exactly as they were (no decay of untouched moments).

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lshtrain/kernels.hpp"
#include "lshtrain/nn.hpp"

namespace lshtrain {

struct AdamState {
  std::vector<float> m, v;            // congruent with the weight buffer
  std::vector<float> bias_m, bias_v;  // congruent with the bias
  std::uint64_t t = 0;                // steps taken
  AdamHyper hyper;

  AdamState() = default;
  AdamState(const LayerWeights& w, const AdamHyper& hyper);
};

// One sparse gradient in coordinate form. Repeated (row, col) pairs are summed.
struct SparseGrad {
  std::vector<std::uint32_t> rows;
  std::vector<std::uint32_t> cols;
  std::vector<float> values;
  std::vector<std::uint32_t> bias_ids;
  std::vector<float> bias_values;
};

// Dense gradient buffer plus a touched mask, filled from per-sample blocks
// and drained by one ADAM step. Touched entries are tracked per contiguous
// line of the weight buffer (a row when row-major, a column when
// column-major) so a step only visits lines that were hit.
class GradientAccumulator {
 public:
  GradientAccumulator() = default;
  explicit GradientAccumulator(const LayerWeights& w);

  void add(const GradBlock& block);
  // Lock-free variant for concurrent callers. Reads and writes are relaxed
  // atomics, so overlapping additions may be lost; nothing tears.
  void add_racy(const GradBlock& block);
  void add_entry(std::uint32_t i, std::uint32_t j, float g);
  void add_bias(std::uint32_t i, float g);

  bool empty() const noexcept;
  // Bias entries touched since the last apply; for an active neuron, this is
  // also the set of neurons whose weights moved.
  std::span<const std::uint8_t> bias_touched() const noexcept { return bias_mask_; }
  std::span<const float> grad() const noexcept { return grad_; }
  std::span<const std::uint8_t> mask() const noexcept { return mask_; }

  // Advances state.t by one, applies a single ADAM step to every touched
  // entry and clears the buffer. Lines are processed on `threads` threads;
  // each line is independent, so the result does not depend on the count.
  void apply(AdamState& state, LayerWeights& w, LaneConfig lanes, Bf16Rounding rounding, int threads = 1);
  void clear();

 private:
  std::size_t flat(std::uint32_t i, std::uint32_t j) const noexcept {
    return order_ == StorageOrder::RowMajor ? static_cast<std::size_t>(i) * m_ + j
                                            : static_cast<std::size_t>(j) * n_ + i;
  }
  std::size_t line_len() const noexcept { return order_ == StorageOrder::RowMajor ? m_ : n_; }

  std::size_t n_ = 0;
  std::size_t m_ = 0;
  StorageOrder order_ = StorageOrder::RowMajor;
  std::vector<float> grad_;
  std::vector<std::uint8_t> mask_;
  std::vector<std::uint8_t> line_touched_;
  std::vector<float> bias_grad_;
  std::vector<std::uint8_t> bias_mask_;
  std::vector<std::uint32_t> lines_;  // scratch for apply
};

// One optimizer step from a coordinate-form gradient: t advances by one and
// each distinct touched position gets one update. Throws BoundsError on an
// index outside the layer.
void apply_sparse(AdamState& state, LayerWeights& w, const SparseGrad& grads, LaneConfig lanes,
                  Bf16Rounding rounding = Bf16Rounding::Truncate);

// Per-layer state and accumulators for a whole network.
class Optimizer {
 public:
  Optimizer(const Network& net, const AdamHyper& hyper);

  std::uint64_t step_count() const noexcept { return t_; }
  const AdamHyper& hyper() const noexcept { return hyper_; }
  std::size_t num_layers() const noexcept { return states_.size(); }
  const AdamState& state(std::size_t l) const { return states_.at(l); }
  AdamState& state_mut(std::size_t l) { return states_.at(l); }
  const GradientAccumulator& accumulator(std::size_t l) const { return accumulators_.at(l); }

  // Adds every layer's block of one sample.
  void accumulate(const SampleTrace& trace);
  void accumulate_racy(const SampleTrace& trace);

  // One step of every layer (t advances once).
  void step(Network& net, int threads = 1);

 private:
  AdamHyper hyper_;
  std::vector<AdamState> states_;
  std::vector<GradientAccumulator> accumulators_;
  std::uint64_t t_ = 0;
};

}  // namespace lshtrain
