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

// Fully connected layers with one contiguous weight buffer each, hash-driven
// active-set selection, and forward/backward passes restricted to the active
// neurons and the non-zero inputs.
//
// Weight layout follows the input density. A layer fed a dense vector keeps
// its neurons row-major and computes one dot product per active neuron; a
// layer fed a sparse vector that produces every output keeps its weights
// column-major and accumulates one broadcast column per non-zero. Backward
// reads the same buffer as W^T, whose layout is the opposite one, so the
// input gradient uses the other kernel with no copy.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "lshtrain/kernels.hpp"
#include "lshtrain/lsh.hpp"
#include "lshtrain/quant.hpp"
#include "lshtrain/rng.hpp"
#include "lshtrain/sparse_data.hpp"

namespace lshtrain {

enum class Activation : std::uint8_t { ReLU, SoftmaxOverActive };

Activation parse_activation(std::string_view s);
std::string_view to_string(Activation a) noexcept;

enum class Precision : std::uint8_t { Fp32, Bf16 };

class LayerWeights {
 public:
  LayerWeights() = default;
  LayerWeights(std::size_t n, std::size_t m, StorageOrder order);

  std::size_t n() const noexcept { return n_; }
  std::size_t m() const noexcept { return m_; }
  std::size_t size() const noexcept { return n_ * m_; }
  StorageOrder order() const noexcept { return order_; }
  Precision precision() const noexcept { return precision_; }

  // Views of the buffer as an n x m matrix. Throw LayoutError when the
  // buffer is held in the other precision.
  MatrixView<const float> fp32() const;
  MatrixView<float> fp32_mut();
  MatrixView<const Bf16> bf16() const;
  MatrixView<Bf16> bf16_mut();

  std::span<const float> bias() const noexcept { return bias_; }
  std::span<float> bias_mut() noexcept { return bias_; }

  float get(std::size_t i, std::size_t j) const;
  void set(std::size_t i, std::size_t j, float w);

  // Neuron i's weight vector in fp32: a view of the buffer when it is
  // stored that way, otherwise a copy in `scratch`.
  std::span<const float> neuron(std::size_t i, std::vector<float>& scratch) const;

  // Converts the buffer in place. Fp32 -> Bf16 rounds with `r`.
  void set_precision(Precision p, Bf16Rounding r = Bf16Rounding::Truncate);

  friend bool operator==(const LayerWeights&, const LayerWeights&) = default;

 private:
  std::size_t n_ = 0;
  std::size_t m_ = 0;
  StorageOrder order_ = StorageOrder::RowMajor;
  Precision precision_ = Precision::Fp32;
  std::vector<float> w32_;
  std::vector<Bf16> w16_;
  std::vector<float> bias_;
};

struct LayerConfig {
  std::size_t n = 0;  // neurons
  std::size_t m = 0;  // fan-in
  Activation activation = Activation::ReLU;
  bool use_lsh = false;
  // input_dim is forced to m and seed is derived from the network seed.
  HashFamilyParams hash;
  std::size_t min_active = 1;
  StorageOrder order = StorageOrder::RowMajor;

  void validate() const;
  friend bool operator==(const LayerConfig&, const LayerConfig&) = default;
};

class Layer {
 public:
  // Glorot-uniform weights drawn in (i, j) order, so the same seed gives
  // the same matrix in either storage order. Bias starts at zero. With
  // use_lsh every neuron is inserted into fresh tables.
  Layer(const LayerConfig& cfg, std::uint64_t seed, LaneConfig lanes = {});

  const LayerConfig& config() const noexcept { return cfg_; }
  const LayerWeights& weights() const noexcept { return weights_; }
  LayerWeights& weights_mut() noexcept { return weights_; }
  const LshTables* tables() const noexcept { return tables_.get(); }
  LshTables* tables_mut() noexcept { return tables_.get(); }

  // Clears the tables and inserts every neuron with its current weights.
  void rebuild_tables(int threads = 1);
  LshTables::RowFn row_fn() const;

 private:
  LayerConfig cfg_;
  LayerWeights weights_;
  std::unique_ptr<LshTables> tables_;
};

// A layer's input: the raw sparse example, or the previous layer's dense
// activation vector (zeros outside its active set).
struct LayerInput {
  bool is_dense = false;
  std::span<const float> dense;
  SparseVectorRef sparse;

  static LayerInput from_dense(std::span<const float> x) { return {true, x, {}}; }
  static LayerInput from_sparse(SparseVectorRef x) { return {false, {}, x}; }
};

struct ActiveSet {
  std::vector<std::uint32_t> ids;
  std::vector<float> pre;          // w_i . x + b_i
  std::vector<float> activations;
  std::vector<float> errors;       // dLoss/d pre, filled by backward

  std::size_t size() const noexcept { return ids.size(); }
};

// Weight gradient of one sample for one layer. It is the outer product
// row_delta * col_values^T placed at rows x cols, so it touches exactly
// |rows| * |cols| entries. The bias gradient is row_delta.
struct GradBlock {
  std::vector<std::uint32_t> rows;
  std::vector<float> row_delta;
  std::vector<std::uint32_t> cols;
  std::vector<float> col_values;

  std::size_t touched() const noexcept { return rows.size() * cols.size(); }
};

struct ForwardOptions {
  QuantMode quant = QuantMode::None;
  Bf16Rounding rounding = Bf16Rounding::Truncate;
  LaneConfig lanes;
};

// ids = query(input) followed by any labels not already present, then
// distinct uniformly drawn neurons until min_active is reached. Without LSH
// every neuron, in order.
void select_active(const Layer& layer, LayerInput input, std::span<const std::uint32_t> labels,
                   SplitMix64& rng, QueryScratch& scratch, std::vector<std::uint32_t>& ids);
std::vector<std::uint32_t> select_active(const Layer& layer, LayerInput input,
                                         std::span<const std::uint32_t> labels, SplitMix64& rng);

// Pre-activations and activations of `ids`. Throws LayoutError when the
// storage order does not suit the input (dense input needs row-major; sparse
// input into a layer without LSH needs column-major).
void forward(const Layer& layer, LayerInput input, std::span<const std::uint32_t> ids, ActiveSet& out,
             const ForwardOptions& opt = {});

// Softmax cross-entropy against targets 1/k on each of the k labels. Sets
// out.errors and returns the loss. Labels outside the active set are
// ignored.
double softmax_cross_entropy(ActiveSet& out, std::span<const std::uint32_t> labels);

// errors[k] = upstream[ids[k]] * relu'(pre[k]).
void relu_errors(ActiveSet& act, std::span<const float> upstream);

// Fills `grad` for (active neuron, non-zero input) pairs. When input_grad is
// non-empty (length m) it receives W^T errors. Throws DimensionError when
// act.errors does not line up with act.ids.
void backward(const Layer& layer, LayerInput input, const ActiveSet& act, GradBlock& grad,
              std::span<float> input_grad, LaneConfig lanes = {});

// Touched entries / (n * m) for one block.
double touched_weight_fraction(const GradBlock& grad, std::size_t n, std::size_t m);

struct LayerTrace {
  std::vector<std::uint32_t> selected;
  ActiveSet active;
  std::vector<float> dense_out;   // hidden layers only
  std::vector<float> input_grad;  // layers after the first
  GradBlock grad;
};

struct SampleTrace {
  std::vector<LayerTrace> layers;
  double loss = 0.0;
};

// Sum of touched entries over layers / sum of n * m.
double touched_weight_fraction(const SampleTrace& trace, std::span<const Layer> layers);

class Network {
 public:
  // Layer l's fan-in must equal layer l-1's width; the last layer is the
  // softmax output and the others use ReLU.
  Network(std::vector<LayerConfig> layers, std::uint64_t seed, LaneConfig lanes = {});

  std::size_t num_layers() const noexcept { return layers_.size(); }
  const Layer& layer(std::size_t l) const { return layers_.at(l); }
  Layer& layer_mut(std::size_t l) { return layers_.at(l); }
  std::span<const Layer> layers() const noexcept { return layers_; }
  std::size_t input_dim() const noexcept { return layers_.front().config().m; }
  std::size_t output_dim() const noexcept { return layers_.back().config().n; }
  std::uint64_t seed() const noexcept { return seed_; }

  LaneConfig lanes() const noexcept { return lanes_; }
  void set_lanes(LaneConfig lanes);

  // Weights go to Bf16 storage under WeightsAndActivations. Throws
  // ConfigError once the mode is locked (training has started).
  void set_quant_mode(QuantMode mode, Bf16Rounding rounding = Bf16Rounding::Truncate);
  QuantMode quant_mode() const noexcept { return quant_; }
  Bf16Rounding rounding() const noexcept { return rounding_; }
  void lock_quant_mode() noexcept { quant_locked_ = true; }
  bool quant_locked() const noexcept { return quant_locked_; }

  void rebuild_tables(int threads = 1);

  // Training pass for one sample: selection, forward, loss, backward.
  // Leaves per-layer gradient blocks in `trace` and returns the loss.
  double train_sample(SparseExampleView ex, SplitMix64& rng, SampleTrace& trace, QueryScratch& scratch) const;

  void forward_sample(SparseVectorRef x, std::span<const std::uint32_t> labels, SplitMix64& rng,
                      SampleTrace& trace, QueryScratch& scratch) const;
  double backward_sample(SparseVectorRef x, std::span<const std::uint32_t> labels, SampleTrace& trace) const;

  // Logits of every output neuron, fp32, no selection and no activation
  // quantization. `trace` is scratch.
  void predict_scores(SparseVectorRef x, std::vector<float>& scores, SampleTrace& trace) const;
  // Highest-scoring output neuron; ties go to the lowest id.
  std::uint32_t predict_top1(SparseVectorRef x, SampleTrace& trace) const;

 private:
  ForwardOptions options() const noexcept { return {quant_, rounding_, lanes_}; }
  LayerInput input_of(std::size_t l, SparseVectorRef x, const SampleTrace& trace) const;

  std::vector<Layer> layers_;
  std::uint64_t seed_ = 0;
  LaneConfig lanes_;
  QuantMode quant_ = QuantMode::None;
  Bf16Rounding rounding_ = Bf16Rounding::Truncate;
  bool quant_locked_ = false;
};

}  // namespace lshtrain
