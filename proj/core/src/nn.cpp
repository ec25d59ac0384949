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

#include "lshtrain/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "lshtrain/error.hpp"

namespace lshtrain {

namespace {

constexpr std::uint64_t kInitStream = 0x1417;
constexpr std::uint64_t kHashStream = 0x4A54;
constexpr std::uint64_t kLayerStream = 0x1A7E;

template <typename T>
float gather_dot(SparseVectorRef x, MatrixView<const T> w, std::size_t i) {
  float s = 0.0f;
  for (std::size_t k = 0; k < x.indices.size(); ++k) {
    const std::uint32_t j = x.indices[k];
    if (j >= w.cols) throw BoundsError("forward: input index " + std::to_string(j) + " out of range");
    if constexpr (std::is_same_v<T, Bf16>) {
      s += x.values[k] * to_fp32(w(i, j));
    } else {
      s += x.values[k] * w(i, j);
    }
  }
  return s;
}

void iota_ids(std::vector<std::uint32_t>& ids, std::size_t n) {
  ids.resize(n);
  std::iota(ids.begin(), ids.end(), 0u);
}

}  // namespace

Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::ReLU;
  if (s == "softmax") return Activation::SoftmaxOverActive;
  throw ConfigError("activation must be relu|softmax, got '" + std::string(s) + "'");
}

std::string_view to_string(Activation a) noexcept { return a == Activation::ReLU ? "relu" : "softmax"; }

// ---------------------------------------------------------------- weights

LayerWeights::LayerWeights(std::size_t n, std::size_t m, StorageOrder order)
    : n_(n), m_(m), order_(order), w32_(n * m, 0.0f), bias_(n, 0.0f) {
  if (n == 0 || m == 0) throw DimensionError("layer dimensions must be positive");
}

MatrixView<const float> LayerWeights::fp32() const {
  if (precision_ != Precision::Fp32) throw LayoutError("weights are stored as bf16");
  return {std::span<const float>(w32_), n_, m_, order_};
}

MatrixView<float> LayerWeights::fp32_mut() {
  if (precision_ != Precision::Fp32) throw LayoutError("weights are stored as bf16");
  return {std::span<float>(w32_), n_, m_, order_};
}

MatrixView<const Bf16> LayerWeights::bf16() const {
  if (precision_ != Precision::Bf16) throw LayoutError("weights are stored as fp32");
  return {std::span<const Bf16>(w16_), n_, m_, order_};
}

MatrixView<Bf16> LayerWeights::bf16_mut() {
  if (precision_ != Precision::Bf16) throw LayoutError("weights are stored as fp32");
  return {std::span<Bf16>(w16_), n_, m_, order_};
}

float LayerWeights::get(std::size_t i, std::size_t j) const {
  if (i >= n_ || j >= m_) throw BoundsError("weight index out of range");
  const std::size_t at = order_ == StorageOrder::RowMajor ? i * m_ + j : j * n_ + i;
  return precision_ == Precision::Fp32 ? w32_[at] : to_fp32(w16_[at]);
}

void LayerWeights::set(std::size_t i, std::size_t j, float w) {
  if (i >= n_ || j >= m_) throw BoundsError("weight index out of range");
  const std::size_t at = order_ == StorageOrder::RowMajor ? i * m_ + j : j * n_ + i;
  if (precision_ == Precision::Fp32) {
    w32_[at] = w;
  } else {
    w16_[at] = from_fp32(w);
  }
}

std::span<const float> LayerWeights::neuron(std::size_t i, std::vector<float>& scratch) const {
  if (i >= n_) throw BoundsError("neuron index out of range");
  if (precision_ == Precision::Fp32 && order_ == StorageOrder::RowMajor) {
    return std::span<const float>(w32_).subspan(i * m_, m_);
  }
  scratch.resize(m_);
  for (std::size_t j = 0; j < m_; ++j) scratch[j] = get(i, j);
  return scratch;
}

void LayerWeights::set_precision(Precision p, Bf16Rounding r) {
  if (p == precision_) return;
  if (p == Precision::Bf16) {
    w16_.resize(w32_.size());
    to_bf16(w32_, w16_, r);
    std::vector<float>().swap(w32_);
  } else {
    w32_.resize(w16_.size());
    to_fp32(w16_, w32_);
    std::vector<Bf16>().swap(w16_);
  }
  precision_ = p;
}

// ---------------------------------------------------------------- layer

void LayerConfig::validate() const {
  if (n == 0 || m == 0) throw ConfigError("layer n and m must be positive");
  if (n > 0xFFFFFFFFull) throw ConfigError("layer width exceeds 32-bit neuron ids");
  if (use_lsh) {
    if (min_active == 0) throw ConfigError("min_active must be >= 1 when use_lsh is set");
    HashFamilyParams p = hash;
    p.input_dim = m;
    p.validate();
  }
}

Layer::Layer(const LayerConfig& cfg, std::uint64_t seed, LaneConfig lanes) : cfg_(cfg) {
  cfg_.validate();
  lanes.validate();
  weights_ = LayerWeights(cfg_.n, cfg_.m, cfg_.order);
  SplitMix64 rng(derive_seed(seed, kInitStream));
  const float a = std::sqrt(6.0f / static_cast<float>(cfg_.n + cfg_.m));
  for (std::size_t i = 0; i < cfg_.n; ++i) {
    for (std::size_t j = 0; j < cfg_.m; ++j) weights_.set(i, j, (2.0f * uniform_unit(rng) - 1.0f) * a);
  }
  cfg_.hash.input_dim = cfg_.m;
  cfg_.hash.seed = derive_seed(seed, kHashStream);
  if (cfg_.use_lsh) {
    tables_ = std::make_unique<LshTables>(cfg_.hash, cfg_.n, lanes);
    rebuild_tables();
  }
}

LshTables::RowFn Layer::row_fn() const {
  return [this](std::uint32_t id, std::vector<float>& scratch) { return weights_.neuron(id, scratch); };
}

void Layer::rebuild_tables(int threads) {
  if (tables_) tables_->rebuild(cfg_.n, row_fn(), threads);
}

// ---------------------------------------------------------------- passes

void select_active(const Layer& layer, LayerInput input, std::span<const std::uint32_t> labels,
                   SplitMix64& rng, QueryScratch& scratch, std::vector<std::uint32_t>& ids) {
  ids.clear();
  const LayerConfig& cfg = layer.config();
  if (!cfg.use_lsh || layer.tables() == nullptr) {
    iota_ids(ids, cfg.n);
    return;
  }
  const LshTables& tables = *layer.tables();
  if (input.is_dense) {
    tables.query(input.dense, ids, scratch);
  } else {
    tables.query(input.sparse, ids, scratch);
  }
  // The query left every returned id stamped with the current epoch.
  for (std::uint32_t label : labels) {
    if (label >= cfg.n) throw BoundsError("label " + std::to_string(label) + " out of range");
    if (scratch.stamp[label] != scratch.epoch) {
      scratch.stamp[label] = scratch.epoch;
      ids.push_back(label);
    }
  }
  const std::size_t target = std::min(cfg.min_active, cfg.n);
  while (ids.size() < target) {
    const auto id = static_cast<std::uint32_t>(uniform_below(rng, cfg.n));
    if (scratch.stamp[id] != scratch.epoch) {
      scratch.stamp[id] = scratch.epoch;
      ids.push_back(id);
    }
  }
}

std::vector<std::uint32_t> select_active(const Layer& layer, LayerInput input,
                                         std::span<const std::uint32_t> labels, SplitMix64& rng) {
  QueryScratch scratch;
  std::vector<std::uint32_t> ids;
  select_active(layer, input, labels, rng, scratch, ids);
  return ids;
}

namespace {

template <typename T>
void linear_part(const Layer& layer, LayerInput input, MatrixView<const T> w, std::span<const std::uint32_t> ids,
                 std::span<float> pre, const LaneConfig& lanes) {
  const LayerConfig& cfg = layer.config();
  if (input.is_dense) {
    if (w.order != StorageOrder::RowMajor) {
      throw LayoutError("forward: dense input needs row-major weights (x dense, W row-major case)");
    }
    matvec_dense_x(input.dense, w, ids, pre, lanes);
    return;
  }
  if (!cfg.use_lsh) {
    if (w.order != StorageOrder::ColMajor) {
      throw LayoutError("forward: sparse input with a dense output needs column-major weights (y dense, W column-major case)");
    }
    thread_local std::vector<float> y;
    y.resize(cfg.n);
    matvec_sparse_x(input.sparse, w, y, lanes);
    for (std::size_t k = 0; k < ids.size(); ++k) pre[k] = y[ids[k]];
    return;
  }
  // Sparse input and sparse output: neither vectorized case applies.
  for (std::size_t k = 0; k < ids.size(); ++k) pre[k] = gather_dot(input.sparse, w, ids[k]);
}

}  // namespace

void forward(const Layer& layer, LayerInput input, std::span<const std::uint32_t> ids, ActiveSet& out,
             const ForwardOptions& opt) {
  const LayerConfig& cfg = layer.config();
  const LayerWeights& lw = layer.weights();
  if (input.is_dense && input.dense.size() != cfg.m) throw DimensionError("forward: input length != fan-in");
  out.ids.assign(ids.begin(), ids.end());
  for (std::uint32_t id : out.ids) {
    if (id >= cfg.n) throw BoundsError("forward: neuron id " + std::to_string(id) + " out of range");
  }
  out.pre.resize(ids.size());
  out.activations.resize(ids.size());
  out.errors.clear();
  if (lw.precision() == Precision::Fp32) {
    linear_part(layer, input, lw.fp32(), out.ids, out.pre, opt.lanes);
  } else {
    linear_part(layer, input, lw.bf16(), out.ids, out.pre, opt.lanes);
  }
  const auto bias = lw.bias();
  for (std::size_t k = 0; k < ids.size(); ++k) out.pre[k] += bias[out.ids[k]];

  if (cfg.activation == Activation::ReLU) {
    for (std::size_t k = 0; k < ids.size(); ++k) out.activations[k] = out.pre[k] > 0.0f ? out.pre[k] : 0.0f;
  } else if (!ids.empty()) {
    const float mx = *std::max_element(out.pre.begin(), out.pre.end());
    double sum = 0.0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      out.activations[k] = std::exp(out.pre[k] - mx);
      sum += out.activations[k];
    }
    const auto inv = static_cast<float>(1.0 / sum);
    for (float& a : out.activations) a *= inv;
  }
  if (quantizes_activations(opt.quant)) quantize_in_place(out.activations, opt.rounding);
}

double softmax_cross_entropy(ActiveSet& out, std::span<const std::uint32_t> labels) {
  const std::size_t k = out.ids.size();
  out.errors.assign(out.activations.begin(), out.activations.end());
  if (k == 0 || labels.empty()) {
    std::fill(out.errors.begin(), out.errors.end(), 0.0f);
    return 0.0;
  }
  double mx = out.pre[0];
  for (float z : out.pre) mx = std::max(mx, static_cast<double>(z));
  double sum = 0.0;
  for (float z : out.pre) sum += std::exp(static_cast<double>(z) - mx);
  const double log_norm = mx + std::log(sum);

  const double y = 1.0 / static_cast<double>(labels.size());
  double present = 0.0;
  double loss = 0.0;
  for (std::uint32_t label : labels) {
    const auto it = std::find(out.ids.begin(), out.ids.end(), label);
    if (it == out.ids.end()) continue;
    const auto pos = static_cast<std::size_t>(it - out.ids.begin());
    loss -= y * (static_cast<double>(out.pre[pos]) - log_norm);
    present += y;
  }
  // d/dz_i of -sum_l y_l log p_l is p_i * sum_l y_l - y_i.
  const auto mass = static_cast<float>(present);
  for (float& e : out.errors) e *= mass;
  for (std::uint32_t label : labels) {
    const auto it = std::find(out.ids.begin(), out.ids.end(), label);
    if (it != out.ids.end()) out.errors[static_cast<std::size_t>(it - out.ids.begin())] -= static_cast<float>(y);
  }
  return loss;
}

void relu_errors(ActiveSet& act, std::span<const float> upstream) {
  act.errors.resize(act.ids.size());
  for (std::size_t k = 0; k < act.ids.size(); ++k) {
    act.errors[k] = act.pre[k] > 0.0f ? upstream[act.ids[k]] : 0.0f;
  }
}

namespace {

template <typename T>
void input_gradient(MatrixView<const T> w, const ActiveSet& act, std::span<float> input_grad, const LaneConfig& lanes) {
  // The buffer read as W^T has the opposite storage order.
  const MatrixView<const T> wt = w.transposed();
  if (wt.order == StorageOrder::ColMajor) {
    matvec_sparse_x(SparseVectorRef{act.ids, act.errors}, wt, input_grad, lanes);
    return;
  }
  thread_local std::vector<float> delta;
  thread_local std::vector<std::uint32_t> all;
  delta.assign(w.rows, 0.0f);
  for (std::size_t k = 0; k < act.ids.size(); ++k) delta[act.ids[k]] += act.errors[k];
  iota_ids(all, wt.rows);
  matvec_dense_x(delta, wt, all, input_grad, lanes);
}

}  // namespace

void backward(const Layer& layer, LayerInput input, const ActiveSet& act, GradBlock& grad,
              std::span<float> input_grad, LaneConfig lanes) {
  const LayerConfig& cfg = layer.config();
  if (act.errors.size() != act.ids.size() || act.pre.size() != act.ids.size()) {
    throw DimensionError("backward: active set errors do not match its ids");
  }
  grad.rows.assign(act.ids.begin(), act.ids.end());
  grad.row_delta.assign(act.errors.begin(), act.errors.end());
  grad.cols.clear();
  grad.col_values.clear();
  if (input.is_dense) {
    if (input.dense.size() != cfg.m) throw DimensionError("backward: input length != fan-in");
    for (std::size_t j = 0; j < input.dense.size(); ++j) {
      if (input.dense[j] != 0.0f) {
        grad.cols.push_back(static_cast<std::uint32_t>(j));
        grad.col_values.push_back(input.dense[j]);
      }
    }
  } else {
    for (std::size_t k = 0; k < input.sparse.indices.size(); ++k) {
      if (input.sparse.indices[k] >= cfg.m) throw BoundsError("backward: input index out of range");
      if (input.sparse.values[k] != 0.0f) {
        grad.cols.push_back(input.sparse.indices[k]);
        grad.col_values.push_back(input.sparse.values[k]);
      }
    }
  }
  if (input_grad.empty()) return;
  if (input_grad.size() != cfg.m) throw DimensionError("backward: input gradient length != fan-in");
  const LayerWeights& lw = layer.weights();
  if (lw.precision() == Precision::Fp32) {
    input_gradient(lw.fp32(), act, input_grad, lanes);
  } else {
    input_gradient(lw.bf16(), act, input_grad, lanes);
  }
}

double touched_weight_fraction(const GradBlock& grad, std::size_t n, std::size_t m) {
  return static_cast<double>(grad.touched()) / (static_cast<double>(n) * static_cast<double>(m));
}

double touched_weight_fraction(const SampleTrace& trace, std::span<const Layer> layers) {
  std::uint64_t touched = 0;
  std::uint64_t total = 0;
  for (std::size_t l = 0; l < layers.size() && l < trace.layers.size(); ++l) {
    touched += trace.layers[l].grad.touched();
    total += static_cast<std::uint64_t>(layers[l].config().n) * layers[l].config().m;
  }
  return total == 0 ? 0.0 : static_cast<double>(touched) / static_cast<double>(total);
}

// ---------------------------------------------------------------- network

Network::Network(std::vector<LayerConfig> layers, std::uint64_t seed, LaneConfig lanes)
    : seed_(seed), lanes_(lanes) {
  if (layers.empty()) throw ConfigError("network needs at least one layer");
  lanes_.validate();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    LayerConfig& c = layers[l];
    const bool last = l + 1 == layers.size();
    if (last && c.activation != Activation::SoftmaxOverActive) {
      throw ConfigError("the output layer must use the softmax-over-active activation");
    }
    if (!last && c.activation != Activation::ReLU) throw ConfigError("hidden layers must use ReLU");
    if (l > 0 && c.m != layers[l - 1].n) {
      throw ConfigError("layer " + std::to_string(l) + " fan-in does not match the previous layer width");
    }
    if (l > 0 && c.order != StorageOrder::RowMajor) {
      throw LayoutError("layer " + std::to_string(l) + " takes a dense input and must be row-major");
    }
    if (l == 0 && !c.use_lsh && c.order != StorageOrder::ColMajor) {
      throw LayoutError("layer 0 takes sparse input into every neuron and must be column-major");
    }
  }
  layers_.reserve(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers_.emplace_back(layers[l], derive_seed(seed, kLayerStream, l), lanes_);
  }
}

void Network::set_lanes(LaneConfig lanes) {
  lanes.validate();
  lanes_ = lanes;
  for (Layer& layer : layers_) {
    if (layer.tables_mut() != nullptr) layer.tables_mut()->set_lanes(lanes);
  }
}

void Network::set_quant_mode(QuantMode mode, Bf16Rounding rounding) {
  if (quant_locked_ && (mode != quant_ || rounding != rounding_)) {
    throw ConfigError("the bf16 mode cannot change once training has started");
  }
  const Precision p = quantizes_weights(mode) ? Precision::Bf16 : Precision::Fp32;
  bool changed = false;
  for (Layer& layer : layers_) {
    if (layer.weights().precision() != p) {
      layer.weights_mut().set_precision(p, rounding);
      changed = true;
    }
  }
  quant_ = mode;
  rounding_ = rounding;
  if (changed) rebuild_tables();
}

void Network::rebuild_tables(int threads) {
  for (Layer& layer : layers_) layer.rebuild_tables(threads);
}

LayerInput Network::input_of(std::size_t l, SparseVectorRef x, const SampleTrace& trace) const {
  return l == 0 ? LayerInput::from_sparse(x) : LayerInput::from_dense(trace.layers[l - 1].dense_out);
}

void Network::forward_sample(SparseVectorRef x, std::span<const std::uint32_t> labels, SplitMix64& rng,
                             SampleTrace& trace, QueryScratch& scratch) const {
  trace.layers.resize(layers_.size());
  const ForwardOptions opt = options();
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    LayerTrace& lt = trace.layers[l];
    const bool last = l + 1 == layers_.size();
    const LayerInput in = input_of(l, x, trace);
    select_active(layer, in, last ? labels : std::span<const std::uint32_t>{}, rng, scratch, lt.selected);
    forward(layer, in, lt.selected, lt.active, opt);
    if (!last) {
      lt.dense_out.assign(layer.config().n, 0.0f);
      for (std::size_t k = 0; k < lt.active.size(); ++k) lt.dense_out[lt.active.ids[k]] = lt.active.activations[k];
    }
  }
}

double Network::backward_sample(SparseVectorRef x, std::span<const std::uint32_t> labels, SampleTrace& trace) const {
  const double loss = softmax_cross_entropy(trace.layers.back().active, labels);
  for (std::size_t l = layers_.size(); l-- > 0;) {
    LayerTrace& lt = trace.layers[l];
    lt.input_grad.resize(l > 0 ? layers_[l].config().m : 0);
    backward(layers_[l], input_of(l, x, trace), lt.active, lt.grad, lt.input_grad, lanes_);
    if (l > 0) relu_errors(trace.layers[l - 1].active, lt.input_grad);
  }
  trace.loss = loss;
  return loss;
}

double Network::train_sample(SparseExampleView ex, SplitMix64& rng, SampleTrace& trace, QueryScratch& scratch) const {
  forward_sample(ex.features(), ex.labels, rng, trace, scratch);
  return backward_sample(ex.features(), ex.labels, trace);
}

void Network::predict_scores(SparseVectorRef x, std::vector<float>& scores, SampleTrace& trace) const {
  trace.layers.resize(layers_.size());
  const ForwardOptions opt{QuantMode::None, rounding_, lanes_};
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    LayerTrace& lt = trace.layers[l];
    iota_ids(lt.selected, layer.config().n);
    forward(layer, input_of(l, x, trace), lt.selected, lt.active, opt);
    if (l + 1 < layers_.size()) lt.dense_out.assign(lt.active.activations.begin(), lt.active.activations.end());
  }
  const ActiveSet& out = trace.layers.back().active;
  scores.assign(out.pre.begin(), out.pre.end());
}

std::uint32_t Network::predict_top1(SparseVectorRef x, SampleTrace& trace) const {
  thread_local std::vector<float> scores;
  predict_scores(x, scores, trace);
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return static_cast<std::uint32_t>(best);
}

}  // namespace lshtrain
