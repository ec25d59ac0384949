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

// Hot inner loops, each in two flavours: a scalar reference that the
// compiler is told not to auto-vectorize, and a lane-parallel version that
// processes lane_width elements per step (one wide register's worth).
// LaneConfig::enabled picks between them at runtime.

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "lshtrain/error.hpp"
#include "lshtrain/quant.hpp"

namespace lshtrain {

enum class StorageOrder : std::uint8_t { RowMajor, ColMajor };

constexpr StorageOrder transposed(StorageOrder o) noexcept {
  return o == StorageOrder::RowMajor ? StorageOrder::ColMajor : StorageOrder::RowMajor;
}

const char* to_string(StorageOrder o) noexcept;

// Non-owning rows x cols matrix over a flat buffer.
//   RowMajor: (i, j) -> data[i * cols + j]
//   ColMajor: (i, j) -> data[j * rows + i]
template <typename T>
struct MatrixView {
  std::span<T> data;
  std::size_t rows = 0;
  std::size_t cols = 0;
  StorageOrder order = StorageOrder::RowMajor;

  constexpr std::size_t index(std::size_t i, std::size_t j) const noexcept {
    return order == StorageOrder::RowMajor ? i * cols + j : j * rows + i;
  }
  constexpr T& operator()(std::size_t i, std::size_t j) const noexcept { return data[index(i, j)]; }

  // Same buffer read as the transpose. A column-major W is a row-major W^T
  // and vice versa, so no data moves.
  constexpr MatrixView transposed() const noexcept {
    return MatrixView{data, cols, rows, lshtrain::transposed(order)};
  }

  // Contiguous run along the storage order: a row for RowMajor, a column for ColMajor.
  constexpr std::span<T> line(std::size_t k) const noexcept {
    const std::size_t len = order == StorageOrder::RowMajor ? cols : rows;
    return data.subspan(k * len, len);
  }

  constexpr operator MatrixView<const T>() const noexcept { return {data, rows, cols, order}; }
};

struct LaneConfig {
  // Elements per step; 16 is one 512-bit register of fp32.
  std::size_t lane_width = 16;
  bool enabled = true;

  // Throws ConfigError unless lane_width is a power of two in [4, 64].
  void validate() const;
};

struct SparseVectorRef {
  std::span<const std::uint32_t> indices;
  std::span<const float> values;
};

struct IndexedValue {
  std::uint32_t index;
  float value;

  friend bool operator==(const IndexedValue&, const IndexedValue&) = default;
};

float dot_dense(std::span<const float> x, std::span<const float> w, LaneConfig cfg);
float dot_dense(std::span<const float> x, std::span<const Bf16> w, LaneConfig cfg);

// out[k] = <W[active[k], :], x>. W must be row-major.
void matvec_dense_x(std::span<const float> x, MatrixView<const float> w,
                    std::span<const std::uint32_t> active, std::span<float> out, LaneConfig cfg);
void matvec_dense_x(std::span<const float> x, MatrixView<const Bf16> w,
                    std::span<const std::uint32_t> active, std::span<float> out, LaneConfig cfg);
std::vector<IndexedValue> matvec_dense_x(std::span<const float> x, MatrixView<const float> w,
                                         std::span<const std::uint32_t> active, LaneConfig cfg);

// y = W x for sparse x, by broadcasting each x_j against column j.
// W must be column-major; y is overwritten.
void matvec_sparse_x(SparseVectorRef x, MatrixView<const float> w, std::span<float> y, LaneConfig cfg);
void matvec_sparse_x(SparseVectorRef x, MatrixView<const Bf16> w, std::span<float> y, LaneConfig cfg);
std::vector<float> matvec_sparse_x(SparseVectorRef x, MatrixView<const float> w, LaneConfig cfg);

struct AdamHyper {
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  bool bias_correction = true;

  friend bool operator==(const AdamHyper&, const AdamHyper&) = default;
};

// One ADAM step at counter t >= 1 over flat buffers:
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
//   w <- w - lr * mhat / (sqrt(vhat) + eps)
// where mhat, vhat are bias-corrected when enabled.
void adam_update(std::span<float> w, std::span<const float> g, std::span<float> m, std::span<float> v,
                 const AdamHyper& hyper, std::uint64_t t, LaneConfig cfg);
void adam_update(std::span<Bf16> w, std::span<const float> g, std::span<float> m, std::span<float> v,
                 const AdamHyper& hyper, std::uint64_t t, LaneConfig cfg,
                 Bf16Rounding rounding = Bf16Rounding::Truncate);

// As adam_update, but positions with mask[k] == 0 keep w, m and v bit-for-bit.
void adam_update_masked(std::span<float> w, std::span<const float> g, std::span<float> m,
                        std::span<float> v, std::span<const std::uint8_t> mask,
                        const AdamHyper& hyper, std::uint64_t t, LaneConfig cfg);
void adam_update_masked(std::span<Bf16> w, std::span<const float> g, std::span<float> m,
                        std::span<float> v, std::span<const std::uint8_t> mask,
                        const AdamHyper& hyper, std::uint64_t t, LaneConfig cfg,
                        Bf16Rounding rounding = Bf16Rounding::Truncate);

// Index and value of the maximum; ties go to the lowest index.
std::pair<std::size_t, float> bin_argmax(std::span<const float> values, LaneConfig cfg);

// Argmax of many equal-sized bins at once. `values` is slot-major:
// values[s * num_bins + b] is slot s of bin b. -inf marks an absent slot;
// winners[b] is the lowest slot holding bin b's maximum, or -1 if the whole
// bin is absent. The lane path works across bins, one bin per lane.
void bins_argmax(std::span<const float> values, std::size_t num_bins, std::span<std::int32_t> winners,
                 LaneConfig cfg);

}  // namespace lshtrain
