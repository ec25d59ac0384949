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

#include "lshtrain/kernels.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>
#include <type_traits>

#if defined(__SSE__) || defined(__AVX__) || defined(__AVX512F__)
#include <immintrin.h>
#endif

// Scalar reference paths must stay scalar even at -O3, otherwise the lane
// on/off comparison measures the auto-vectorizer rather than the kernels.
#if defined(__clang__)
#define LSHTRAIN_SCALAR
#define LSHTRAIN_NO_VECTORIZE _Pragma("clang loop vectorize(disable) interleave(disable)")
#elif defined(__GNUC__)
#define LSHTRAIN_SCALAR __attribute__((optimize("no-tree-vectorize")))
#define LSHTRAIN_NO_VECTORIZE
#else
#define LSHTRAIN_SCALAR
#define LSHTRAIN_NO_VECTORIZE
#endif

namespace lshtrain {

static_assert(sizeof(Bf16) == sizeof(std::uint16_t));

const char* to_string(StorageOrder o) noexcept {
  return o == StorageOrder::RowMajor ? "row-major" : "column-major";
}

void LaneConfig::validate() const {
  if (lane_width < 4 || lane_width > 64 || !std::has_single_bit(lane_width)) {
    throw ConfigError("lane_width must be a power of two in [4, 64], got " + std::to_string(lane_width));
  }
}

namespace {

template <int W>
struct Lanes {
  typedef float f32 __attribute__((vector_size(W * sizeof(float))));
  typedef std::int32_t i32 __attribute__((vector_size(W * sizeof(std::int32_t))));
  typedef std::uint32_t u32 __attribute__((vector_size(W * sizeof(std::uint32_t))));
  typedef std::uint16_t u16 __attribute__((vector_size(W * sizeof(std::uint16_t))));
  typedef std::uint8_t u8 __attribute__((vector_size(W * sizeof(std::uint8_t))));
};

template <typename F>
decltype(auto) with_lanes(const LaneConfig& cfg, F&& f) {
  switch (cfg.lane_width) {
    case 4: return f(std::integral_constant<int, 4>{});
    case 8: return f(std::integral_constant<int, 8>{});
    case 16: return f(std::integral_constant<int, 16>{});
    case 32: return f(std::integral_constant<int, 32>{});
    case 64: return f(std::integral_constant<int, 64>{});
    default: cfg.validate(); return f(std::integral_constant<int, 16>{});
  }
}

inline float value_of(float x) { return x; }
inline float value_of(Bf16 x) { return to_fp32(x); }

template <int W>
typename Lanes<W>::f32 load(const float* p) {
  typename Lanes<W>::f32 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

template <int W>
typename Lanes<W>::f32 load(const Bf16* p) {
  typename Lanes<W>::u16 h;
  std::memcpy(&h, p, sizeof h);
  const auto u = __builtin_convertvector(h, typename Lanes<W>::u32) << 16;
  return (typename Lanes<W>::f32)u;
}

template <int W>
void store(float* p, typename Lanes<W>::f32 v) {
  std::memcpy(p, &v, sizeof v);
}

template <int W>
typename Lanes<W>::i32 load_mask(const std::uint8_t* p) {
  typename Lanes<W>::u8 b;
  std::memcpy(&b, p, sizeof b);
  return __builtin_convertvector(b, typename Lanes<W>::i32) != 0;
}

// Bitwise select: lanes where mask is all-ones take a, others take b.
template <int W, typename V>
V select(typename Lanes<W>::i32 mask, V a, V b) {
  using I = typename Lanes<W>::i32;
  const I ai = (I)a;
  const I bi = (I)b;
  return (V)((ai & mask) | (bi & ~mask));
}

template <int W>
float hsum(typename Lanes<W>::f32 v) {
  float s = 0.0f;
  for (int k = 0; k < W; ++k) s += v[k];
  return s;
}

template <int W>
typename Lanes<W>::f32 vsqrt(typename Lanes<W>::f32 v) {
  typename Lanes<W>::f32 r{};
#if defined(__AVX512F__)
  if constexpr (W % 16 == 0) {
    for (int k = 0; k < W; k += 16) {
      __m512 x;
      std::memcpy(&x, reinterpret_cast<const float*>(&v) + k, sizeof x);
      x = _mm512_sqrt_ps(x);
      std::memcpy(reinterpret_cast<float*>(&r) + k, &x, sizeof x);
    }
    return r;
  }
#endif
#if defined(__AVX__)
  if constexpr (W % 8 == 0) {
    for (int k = 0; k < W; k += 8) {
      __m256 x;
      std::memcpy(&x, reinterpret_cast<const float*>(&v) + k, sizeof x);
      x = _mm256_sqrt_ps(x);
      std::memcpy(reinterpret_cast<float*>(&r) + k, &x, sizeof x);
    }
    return r;
  }
#endif
#if defined(__SSE__)
  for (int k = 0; k < W; k += 4) {
    __m128 x;
    std::memcpy(&x, reinterpret_cast<const float*>(&v) + k, sizeof x);
    x = _mm_sqrt_ps(x);
    std::memcpy(reinterpret_cast<float*>(&r) + k, &x, sizeof x);
  }
#else
  for (int k = 0; k < W; ++k) r[k] = std::sqrt(v[k]);
#endif
  return r;
}

// fp32 lanes -> bf16 pattern lanes (as u32), matching from_fp32 / from_fp32_rne.
template <int W>
typename Lanes<W>::u32 narrow_bf16(typename Lanes<W>::f32 v, Bf16Rounding rounding) {
  using U = typename Lanes<W>::u32;
  const U u = (U)v;
  const auto special = (u & 0x7F800000u) == 0x7F800000u;
  U hi = u >> 16;
  if (rounding == Bf16Rounding::NearestEven) {
    const U rne = (u + (0x7FFFu + (hi & 1u))) >> 16;
    hi = select<W>(special, hi, rne);
  }
  const auto quiet = special & ((u & 0x007FFFFFu) != 0) & ((hi & 0x7Fu) == 0);
  hi |= (U)quiet & 0x40u;
  return hi;
}

template <int W>
void store_bf16(Bf16* p, typename Lanes<W>::u32 hi) {
  const auto h = __builtin_convertvector(hi, typename Lanes<W>::u16);
  std::memcpy(static_cast<void*>(p), &h, sizeof h);
}

template <int W>
typename Lanes<W>::u32 load_bf16_bits(const Bf16* p) {
  typename Lanes<W>::u16 h;
  std::memcpy(&h, p, sizeof h);
  return __builtin_convertvector(h, typename Lanes<W>::u32);
}

// ---------------------------------------------------------------- dot

template <typename T>
LSHTRAIN_SCALAR float dot_scalar(const float* x, const T* w, std::size_t n) {
  float s = 0.0f;
  LSHTRAIN_NO_VECTORIZE
  for (std::size_t j = 0; j < n; ++j) s += x[j] * value_of(w[j]);
  return s;
}

template <int W, typename T>
float dot_lanes(const float* x, const T* w, std::size_t n) {
  typename Lanes<W>::f32 acc{};
  std::size_t j = 0;
  for (; j + W <= n; j += W) acc += load<W>(x + j) * load<W>(w + j);
  float s = hsum<W>(acc);
  for (; j < n; ++j) s += x[j] * value_of(w[j]);
  return s;
}

template <typename T>
float dot_impl(const float* x, const T* w, std::size_t n, const LaneConfig& cfg) {
  if (!cfg.enabled) return dot_scalar(x, w, n);
  return with_lanes(cfg, [&](auto lanes) { return dot_lanes<decltype(lanes)::value>(x, w, n); });
}

template <typename T>
float dot_checked(std::span<const float> x, std::span<const T> w, const LaneConfig& cfg) {
  if (x.size() != w.size()) {
    throw DimensionError("dot_dense: length mismatch " + std::to_string(x.size()) + " vs " +
                         std::to_string(w.size()));
  }
  return dot_impl(x.data(), w.data(), x.size(), cfg);
}

// ---------------------------------------------------------------- matvec

template <typename T>
void matvec_dense_impl(std::span<const float> x, MatrixView<const T> w,
                       std::span<const std::uint32_t> active, std::span<float> out,
                       const LaneConfig& cfg) {
  if (w.order != StorageOrder::RowMajor) {
    throw LayoutError("matvec_dense_x: a dense input needs row-major weights, got column-major");
  }
  if (x.size() != w.cols) throw DimensionError("matvec_dense_x: input length != matrix columns");
  if (out.size() != active.size()) throw DimensionError("matvec_dense_x: output length != active count");
  for (std::size_t k = 0; k < active.size(); ++k) {
    const std::uint32_t i = active[k];
    if (i >= w.rows) throw BoundsError("matvec_dense_x: active neuron " + std::to_string(i) + " out of range");
    out[k] = dot_impl(x.data(), w.data.data() + static_cast<std::size_t>(i) * w.cols, w.cols, cfg);
  }
}

template <typename T>
LSHTRAIN_SCALAR void axpy_scalar(float a, const T* col, float* y, std::size_t n) {
  LSHTRAIN_NO_VECTORIZE
  for (std::size_t i = 0; i < n; ++i) y[i] += a * value_of(col[i]);
}

template <int W, typename T>
void axpy_lanes(float a, const T* col, float* y, std::size_t n) {
  const typename Lanes<W>::f32 av = typename Lanes<W>::f32{} + a;
  std::size_t i = 0;
  for (; i + W <= n; i += W) store<W>(y + i, load<W>(y + i) + av * load<W>(col + i));
  for (; i < n; ++i) y[i] += a * value_of(col[i]);
}

template <typename T>
void matvec_sparse_impl(SparseVectorRef x, MatrixView<const T> w, std::span<float> y, const LaneConfig& cfg) {
  if (w.order != StorageOrder::ColMajor) {
    throw LayoutError("matvec_sparse_x: a dense output from sparse input needs column-major weights, got row-major");
  }
  if (x.indices.size() != x.values.size()) throw DimensionError("matvec_sparse_x: indices/values length mismatch");
  if (y.size() != w.rows) throw DimensionError("matvec_sparse_x: output length != matrix rows");
  std::fill(y.begin(), y.end(), 0.0f);
  for (std::size_t k = 0; k < x.indices.size(); ++k) {
    const std::uint32_t j = x.indices[k];
    if (j >= w.cols) throw BoundsError("matvec_sparse_x: input index " + std::to_string(j) + " out of range");
    const T* col = w.data.data() + static_cast<std::size_t>(j) * w.rows;
    if (!cfg.enabled) {
      axpy_scalar(x.values[k], col, y.data(), w.rows);
    } else {
      with_lanes(cfg, [&](auto lanes) { axpy_lanes<decltype(lanes)::value>(x.values[k], col, y.data(), w.rows); });
    }
  }
}

// ---------------------------------------------------------------- adam

struct AdamCoeffs {
  float lr, b1, b2, one_minus_b1, one_minus_b2, c1, c2, eps;
};

AdamCoeffs coeffs(const AdamHyper& h, std::uint64_t t) {
  if (t == 0) throw ConfigError("adam_update: step counter must be >= 1");
  AdamCoeffs c{h.lr, h.beta1, h.beta2, 1.0f - h.beta1, 1.0f - h.beta2, 1.0f, 1.0f, h.eps};
  if (h.bias_correction) {
    const double td = static_cast<double>(t);
    c.c1 = static_cast<float>(1.0 / (1.0 - std::pow(static_cast<double>(h.beta1), td)));
    c.c2 = static_cast<float>(1.0 / (1.0 - std::pow(static_cast<double>(h.beta2), td)));
  }
  return c;
}

// Shared scalar step; returns the new weight.
inline float adam_scalar_step(float w, float g, float& m, float& v, const AdamCoeffs& c) {
  m = c.b1 * m + c.one_minus_b1 * g;
  v = c.b2 * v + c.one_minus_b2 * (g * g);
  const float mhat = m * c.c1;
  const float vhat = v * c.c2;
  return w - c.lr * mhat / (std::sqrt(vhat) + c.eps);
}

template <typename T>
LSHTRAIN_SCALAR void adam_scalar(T* w, const float* g, float* m, float* v, const std::uint8_t* mask,
                                 std::size_t n, const AdamCoeffs& c, Bf16Rounding rounding) {
  LSHTRAIN_NO_VECTORIZE
  for (std::size_t k = 0; k < n; ++k) {
    if (mask != nullptr && mask[k] == 0) continue;
    const float nw = adam_scalar_step(value_of(w[k]), g[k], m[k], v[k], c);
    if constexpr (std::is_same_v<T, Bf16>) {
      w[k] = from_fp32(nw, rounding);
    } else {
      (void)rounding;
      w[k] = nw;
    }
  }
}

template <int W, typename T>
void adam_lanes(T* w, const float* g, float* m, float* v, const std::uint8_t* mask, std::size_t n,
                const AdamCoeffs& c, Bf16Rounding rounding) {
  using F = typename Lanes<W>::f32;
  const F b1 = F{} + c.b1, b2 = F{} + c.b2, omb1 = F{} + c.one_minus_b1, omb2 = F{} + c.one_minus_b2;
  const F c1 = F{} + c.c1, c2 = F{} + c.c2, lr = F{} + c.lr, eps = F{} + c.eps;
  std::size_t k = 0;
  for (; k + W <= n; k += W) {
    const F gv = load<W>(g + k);
    const F mo = load<W>(m + k);
    const F vo = load<W>(v + k);
    const F wo = load<W>(w + k);
    const F mn = b1 * mo + omb1 * gv;
    const F vn = b2 * vo + omb2 * (gv * gv);
    const F wn = wo - lr * (mn * c1) / (vsqrt<W>(vn * c2) + eps);
    if (mask != nullptr) {
      const auto mk = load_mask<W>(mask + k);
      store<W>(m + k, select<W>(mk, mn, mo));
      store<W>(v + k, select<W>(mk, vn, vo));
      if constexpr (std::is_same_v<T, Bf16>) {
        store_bf16<W>(w + k, select<W>(mk, narrow_bf16<W>(wn, rounding), load_bf16_bits<W>(w + k)));
      } else {
        store<W>(w + k, select<W>(mk, wn, wo));
      }
    } else {
      store<W>(m + k, mn);
      store<W>(v + k, vn);
      if constexpr (std::is_same_v<T, Bf16>) {
        store_bf16<W>(w + k, narrow_bf16<W>(wn, rounding));
      } else {
        store<W>(w + k, wn);
      }
    }
  }
  if (k < n) adam_scalar(w + k, g + k, m + k, v + k, mask ? mask + k : nullptr, n - k, c, rounding);
}

template <typename T>
void adam_impl(std::span<T> w, std::span<const float> g, std::span<float> m, std::span<float> v,
               const std::uint8_t* mask, std::size_t mask_len, const AdamHyper& hyper, std::uint64_t t,
               const LaneConfig& cfg, Bf16Rounding rounding) {
  const std::size_t n = w.size();
  if (g.size() != n || m.size() != n || v.size() != n || (mask != nullptr && mask_len != n)) {
    throw DimensionError("adam_update: buffer lengths differ");
  }
  const AdamCoeffs c = coeffs(hyper, t);
  if (!cfg.enabled) {
    adam_scalar(w.data(), g.data(), m.data(), v.data(), mask, n, c, rounding);
    return;
  }
  with_lanes(cfg, [&](auto lanes) {
    adam_lanes<decltype(lanes)::value>(w.data(), g.data(), m.data(), v.data(), mask, n, c, rounding);
  });
}

// ---------------------------------------------------------------- argmax

LSHTRAIN_SCALAR std::pair<std::size_t, float> argmax_scalar(const float* x, std::size_t n) {
  std::size_t best = 0;
  float best_v = x[0];
  LSHTRAIN_NO_VECTORIZE
  for (std::size_t j = 1; j < n; ++j) {
    if (x[j] > best_v) {
      best_v = x[j];
      best = j;
    }
  }
  return {best, best_v};
}

template <int W>
std::pair<std::size_t, float> argmax_lanes(const float* x, std::size_t n) {
  using F = typename Lanes<W>::f32;
  using I = typename Lanes<W>::i32;
  if (n < 2 * W) return argmax_scalar(x, n);
  I iota;
  for (int k = 0; k < W; ++k) iota[k] = k;
  F best_v = load<W>(x);
  I best_i = iota;
  std::size_t j = W;
  for (; j + W <= n; j += W) {
    const F v = load<W>(x + j);
    const I gt = v > best_v;
    best_v = select<W>(gt, v, best_v);
    best_i = select<W>(gt, iota + static_cast<std::int32_t>(j), best_i);
  }
  // Each lane holds its earliest maximum; break cross-lane ties by index.
  std::size_t best = static_cast<std::size_t>(best_i[0]);
  float bv = best_v[0];
  for (int k = 1; k < W; ++k) {
    const auto idx = static_cast<std::size_t>(best_i[k]);
    if (best_v[k] > bv || (best_v[k] == bv && idx < best)) {
      bv = best_v[k];
      best = idx;
    }
  }
  for (; j < n; ++j) {
    if (x[j] > bv) {
      bv = x[j];
      best = j;
    }
  }
  return {best, bv};
}

LSHTRAIN_SCALAR void bins_argmax_scalar(const float* x, std::size_t bins, std::size_t slots, std::int32_t* out) {
  LSHTRAIN_NO_VECTORIZE
  for (std::size_t b = 0; b < bins; ++b) {
    float best = x[b];
    std::int32_t idx = best > -std::numeric_limits<float>::infinity() ? 0 : -1;
    for (std::size_t s = 1; s < slots; ++s) {
      const float v = x[s * bins + b];
      if (v > best) {
        best = v;
        idx = static_cast<std::int32_t>(s);
      }
    }
    out[b] = idx;
  }
}

template <int W>
void bins_argmax_lanes(const float* x, std::size_t bins, std::size_t slots, std::int32_t* out) {
  using F = typename Lanes<W>::f32;
  using I = typename Lanes<W>::i32;
  const F absent = F{} - std::numeric_limits<float>::infinity();
  std::size_t b = 0;
  for (; b + W <= bins; b += W) {
    F best = load<W>(x + b);
    I idx = select<W>(best > absent, I{}, I{} - 1);
    for (std::size_t s = 1; s < slots; ++s) {
      const F v = load<W>(x + s * bins + b);
      const I gt = v > best;
      best = select<W>(gt, v, best);
      idx = select<W>(gt, I{} + static_cast<std::int32_t>(s), idx);
    }
    std::memcpy(out + b, &idx, sizeof idx);
  }
  if (b < bins) {
    for (; b < bins; ++b) {
      float best = x[b];
      std::int32_t idx = best > -std::numeric_limits<float>::infinity() ? 0 : -1;
      for (std::size_t s = 1; s < slots; ++s) {
        const float v = x[s * bins + b];
        if (v > best) {
          best = v;
          idx = static_cast<std::int32_t>(s);
        }
      }
      out[b] = idx;
    }
  }
}

}  // namespace

float dot_dense(std::span<const float> x, std::span<const float> w, LaneConfig cfg) {
  return dot_checked(x, w, cfg);
}

float dot_dense(std::span<const float> x, std::span<const Bf16> w, LaneConfig cfg) {
  return dot_checked(x, w, cfg);
}

void matvec_dense_x(std::span<const float> x, MatrixView<const float> w,
                    std::span<const std::uint32_t> active, std::span<float> out, LaneConfig cfg) {
  matvec_dense_impl(x, w, active, out, cfg);
}

void matvec_dense_x(std::span<const float> x, MatrixView<const Bf16> w,
                    std::span<const std::uint32_t> active, std::span<float> out, LaneConfig cfg) {
  matvec_dense_impl(x, w, active, out, cfg);
}

std::vector<IndexedValue> matvec_dense_x(std::span<const float> x, MatrixView<const float> w,
                                         std::span<const std::uint32_t> active, LaneConfig cfg) {
  std::vector<float> out(active.size());
  matvec_dense_impl(x, w, active, std::span<float>(out), cfg);
  std::vector<IndexedValue> result(active.size());
  for (std::size_t k = 0; k < active.size(); ++k) result[k] = {active[k], out[k]};
  return result;
}

void matvec_sparse_x(SparseVectorRef x, MatrixView<const float> w, std::span<float> y, LaneConfig cfg) {
  matvec_sparse_impl(x, w, y, cfg);
}

void matvec_sparse_x(SparseVectorRef x, MatrixView<const Bf16> w, std::span<float> y, LaneConfig cfg) {
  matvec_sparse_impl(x, w, y, cfg);
}

std::vector<float> matvec_sparse_x(SparseVectorRef x, MatrixView<const float> w, LaneConfig cfg) {
  std::vector<float> y(w.rows);
  matvec_sparse_impl(x, w, std::span<float>(y), cfg);
  return y;
}

void adam_update(std::span<float> w, std::span<const float> g, std::span<float> m, std::span<float> v,
                 const AdamHyper& hyper, std::uint64_t t, LaneConfig cfg) {
  adam_impl(w, g, m, v, nullptr, 0, hyper, t, cfg, Bf16Rounding::Truncate);
}

void adam_update(std::span<Bf16> w, std::span<const float> g, std::span<float> m, std::span<float> v,
                 const AdamHyper& hyper, std::uint64_t t, LaneConfig cfg, Bf16Rounding rounding) {
  adam_impl(w, g, m, v, nullptr, 0, hyper, t, cfg, rounding);
}

void adam_update_masked(std::span<float> w, std::span<const float> g, std::span<float> m,
                        std::span<float> v, std::span<const std::uint8_t> mask,
                        const AdamHyper& hyper, std::uint64_t t, LaneConfig cfg) {
  if (mask.size() != w.size()) throw DimensionError("adam_update_masked: mask length differs");
  adam_impl(w, g, m, v, mask.data(), mask.size(), hyper, t, cfg, Bf16Rounding::Truncate);
}

void adam_update_masked(std::span<Bf16> w, std::span<const float> g, std::span<float> m,
                        std::span<float> v, std::span<const std::uint8_t> mask,
                        const AdamHyper& hyper, std::uint64_t t, LaneConfig cfg, Bf16Rounding rounding) {
  if (mask.size() != w.size()) throw DimensionError("adam_update_masked: mask length differs");
  adam_impl(w, g, m, v, mask.data(), mask.size(), hyper, t, cfg, rounding);
}

std::pair<std::size_t, float> bin_argmax(std::span<const float> values, LaneConfig cfg) {
  if (values.empty()) throw DimensionError("bin_argmax: empty input");
  if (!cfg.enabled) return argmax_scalar(values.data(), values.size());
  return with_lanes(cfg, [&](auto lanes) { return argmax_lanes<decltype(lanes)::value>(values.data(), values.size()); });
}

void bins_argmax(std::span<const float> values, std::size_t num_bins, std::span<std::int32_t> winners,
                 LaneConfig cfg) {
  if (num_bins == 0 || values.size() % num_bins != 0 || values.empty()) {
    throw DimensionError("bins_argmax: values must hold a whole number of slots per bin");
  }
  if (winners.size() != num_bins) throw DimensionError("bins_argmax: winners length != num_bins");
  const std::size_t slots = values.size() / num_bins;
  if (!cfg.enabled) {
    bins_argmax_scalar(values.data(), num_bins, slots, winners.data());
    return;
  }
  with_lanes(cfg, [&](auto lanes) {
    bins_argmax_lanes<decltype(lanes)::value>(values.data(), num_bins, slots, winners.data());
  });
}

}  // namespace lshtrain
