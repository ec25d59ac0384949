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

#include "lshtrain/optimizer.hpp"

#include <algorithm>
#include <atomic>
#include <string>

#include "lshtrain/error.hpp"

namespace lshtrain {

AdamState::AdamState(const LayerWeights& w, const AdamHyper& h)
    : m(w.size(), 0.0f), v(w.size(), 0.0f), bias_m(w.n(), 0.0f), bias_v(w.n(), 0.0f), hyper(h) {}

GradientAccumulator::GradientAccumulator(const LayerWeights& w)
    : n_(w.n()),
      m_(w.m()),
      order_(w.order()),
      grad_(w.size(), 0.0f),
      mask_(w.size(), 0),
      line_touched_(w.order() == StorageOrder::RowMajor ? w.n() : w.m(), 0),
      bias_grad_(w.n(), 0.0f),
      bias_mask_(w.n(), 0) {}

void GradientAccumulator::add(const GradBlock& b) {
  if (order_ == StorageOrder::RowMajor) {
    for (std::size_t r = 0; r < b.rows.size(); ++r) {
      const std::uint32_t i = b.rows[r];
      const float d = b.row_delta[r];
      float* g = grad_.data() + static_cast<std::size_t>(i) * m_;
      std::uint8_t* mk = mask_.data() + static_cast<std::size_t>(i) * m_;
      for (std::size_t c = 0; c < b.cols.size(); ++c) {
        g[b.cols[c]] += d * b.col_values[c];
        mk[b.cols[c]] = 1;
      }
      if (!b.cols.empty()) line_touched_[i] = 1;
    }
  } else {
    for (std::size_t c = 0; c < b.cols.size(); ++c) {
      const std::uint32_t j = b.cols[c];
      const float x = b.col_values[c];
      float* g = grad_.data() + static_cast<std::size_t>(j) * n_;
      std::uint8_t* mk = mask_.data() + static_cast<std::size_t>(j) * n_;
      for (std::size_t r = 0; r < b.rows.size(); ++r) {
        g[b.rows[r]] += b.row_delta[r] * x;
        mk[b.rows[r]] = 1;
      }
      if (!b.rows.empty()) line_touched_[j] = 1;
    }
  }
  for (std::size_t r = 0; r < b.rows.size(); ++r) {
    bias_grad_[b.rows[r]] += b.row_delta[r];
    bias_mask_[b.rows[r]] = 1;
  }
}

namespace {

inline void racy_add(float& slot, float g) {
  std::atomic_ref<float> a(slot);
  a.store(a.load(std::memory_order_relaxed) + g, std::memory_order_relaxed);
}

inline void racy_set(std::uint8_t& flag) { std::atomic_ref<std::uint8_t>(flag).store(1, std::memory_order_relaxed); }

}  // namespace

void GradientAccumulator::add_racy(const GradBlock& b) {
  for (std::size_t r = 0; r < b.rows.size(); ++r) {
    const std::uint32_t i = b.rows[r];
    for (std::size_t c = 0; c < b.cols.size(); ++c) {
      const std::size_t at = flat(i, b.cols[c]);
      racy_add(grad_[at], b.row_delta[r] * b.col_values[c]);
      racy_set(mask_[at]);
      racy_set(line_touched_[order_ == StorageOrder::RowMajor ? i : b.cols[c]]);
    }
    racy_add(bias_grad_[i], b.row_delta[r]);
    racy_set(bias_mask_[i]);
  }
}

void GradientAccumulator::add_entry(std::uint32_t i, std::uint32_t j, float g) {
  if (i >= n_ || j >= m_) {
    throw BoundsError("gradient entry (" + std::to_string(i) + ", " + std::to_string(j) + ") out of range");
  }
  const std::size_t at = flat(i, j);
  grad_[at] += g;
  mask_[at] = 1;
  line_touched_[order_ == StorageOrder::RowMajor ? i : j] = 1;
}

void GradientAccumulator::add_bias(std::uint32_t i, float g) {
  if (i >= n_) throw BoundsError("bias gradient index " + std::to_string(i) + " out of range");
  bias_grad_[i] += g;
  bias_mask_[i] = 1;
}

bool GradientAccumulator::empty() const noexcept {
  return std::find(line_touched_.begin(), line_touched_.end(), 1) == line_touched_.end() &&
         std::find(bias_mask_.begin(), bias_mask_.end(), 1) == bias_mask_.end();
}

void GradientAccumulator::clear() {
  std::fill(grad_.begin(), grad_.end(), 0.0f);
  std::fill(mask_.begin(), mask_.end(), 0);
  std::fill(line_touched_.begin(), line_touched_.end(), 0);
  std::fill(bias_grad_.begin(), bias_grad_.end(), 0.0f);
  std::fill(bias_mask_.begin(), bias_mask_.end(), 0);
}

void GradientAccumulator::apply(AdamState& state, LayerWeights& w, LaneConfig lanes, Bf16Rounding rounding,
                                int threads) {
  if (w.n() != n_ || w.m() != m_ || w.order() != order_ || state.m.size() != grad_.size()) {
    throw DimensionError("accumulator, state and weights describe different layers");
  }
  ++state.t;
  lines_.clear();
  for (std::size_t k = 0; k < line_touched_.size(); ++k) {
    if (line_touched_[k]) lines_.push_back(static_cast<std::uint32_t>(k));
  }
  const std::size_t len = line_len();
  const bool bf16 = w.precision() == Precision::Bf16;
  float* w32 = bf16 ? nullptr : w.fp32_mut().data.data();
  Bf16* w16 = bf16 ? w.bf16_mut().data.data() : nullptr;
  const auto count = static_cast<std::ptrdiff_t>(lines_.size());
#pragma omp parallel for schedule(static) num_threads(std::max(threads, 1)) if (count > 64)
  for (std::ptrdiff_t q = 0; q < count; ++q) {
    const std::size_t off = static_cast<std::size_t>(lines_[q]) * len;
    std::span<float> g(grad_.data() + off, len);
    std::span<std::uint8_t> mk(mask_.data() + off, len);
    std::span<float> mm(state.m.data() + off, len);
    std::span<float> vv(state.v.data() + off, len);
    if (bf16) {
      adam_update_masked(std::span<Bf16>(w16 + off, len), g, mm, vv, mk, state.hyper, state.t, lanes, rounding);
    } else {
      adam_update_masked(std::span<float>(w32 + off, len), g, mm, vv, mk, state.hyper, state.t, lanes);
    }
    std::fill(g.begin(), g.end(), 0.0f);
    std::fill(mk.begin(), mk.end(), 0);
    line_touched_[lines_[q]] = 0;
  }
  adam_update_masked(w.bias_mut(), bias_grad_, state.bias_m, state.bias_v, bias_mask_, state.hyper, state.t, lanes);
  std::fill(bias_grad_.begin(), bias_grad_.end(), 0.0f);
  std::fill(bias_mask_.begin(), bias_mask_.end(), 0);
}

void apply_sparse(AdamState& state, LayerWeights& w, const SparseGrad& grads, LaneConfig lanes,
                  Bf16Rounding rounding) {
  if (grads.rows.size() != grads.cols.size() || grads.rows.size() != grads.values.size() ||
      grads.bias_ids.size() != grads.bias_values.size()) {
    throw DimensionError("apply_sparse: coordinate arrays differ in length");
  }
  GradientAccumulator acc(w);
  for (std::size_t k = 0; k < grads.rows.size(); ++k) acc.add_entry(grads.rows[k], grads.cols[k], grads.values[k]);
  for (std::size_t k = 0; k < grads.bias_ids.size(); ++k) acc.add_bias(grads.bias_ids[k], grads.bias_values[k]);
  acc.apply(state, w, lanes, rounding);
}

Optimizer::Optimizer(const Network& net, const AdamHyper& hyper) : hyper_(hyper) {
  for (const Layer& layer : net.layers()) {
    states_.emplace_back(layer.weights(), hyper);
    accumulators_.emplace_back(layer.weights());
  }
}

void Optimizer::accumulate(const SampleTrace& trace) {
  for (std::size_t l = 0; l < accumulators_.size(); ++l) accumulators_[l].add(trace.layers[l].grad);
}

void Optimizer::accumulate_racy(const SampleTrace& trace) {
  for (std::size_t l = 0; l < accumulators_.size(); ++l) accumulators_[l].add_racy(trace.layers[l].grad);
}

void Optimizer::step(Network& net, int threads) {
  if (net.num_layers() != accumulators_.size()) throw DimensionError("optimizer built for a different network");
  ++t_;
  for (std::size_t l = 0; l < accumulators_.size(); ++l) {
    accumulators_[l].apply(states_[l], net.layer_mut(l).weights_mut(), net.lanes(), net.rounding(), threads);
  }
}

}  // namespace lshtrain
