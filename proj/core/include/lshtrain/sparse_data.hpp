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

// Coalesced sparse multi-label datasets.
//
// A batch keeps every example's feature indices in one contiguous array,
// the matching values in a second, and an offsets array (length
// num_examples + 1) marking where each example starts. Labels use the same
// scheme. Threads walking neighbouring examples therefore walk neighbouring
// memory. FragmentedBatch is the per-example-vectors alternative, kept only
// so the two layouts can be benchmarked against each other.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "lshtrain/kernels.hpp"

namespace lshtrain {

struct DatasetHeader {
  std::size_t num_examples = 0;
  std::size_t input_dim = 0;
  std::size_t label_dim = 0;

  friend bool operator==(const DatasetHeader&, const DatasetHeader&) = default;
};

struct SparseExampleView {
  std::span<const std::uint32_t> indices;
  std::span<const float> values;
  std::span<const std::uint32_t> labels;

  SparseVectorRef features() const noexcept { return {indices, values}; }
};

class SparseBatchView;

class SparseBatch {
 public:
  SparseBatch() = default;
  // Takes ownership and checks every invariant; throws FormatError or RangeError.
  SparseBatch(std::vector<std::uint32_t> indices, std::vector<float> values,
              std::vector<std::size_t> offsets, std::vector<std::uint32_t> label_indices,
              std::vector<std::size_t> label_offsets, std::size_t input_dim, std::size_t label_dim);

  static SparseBatch empty(std::size_t input_dim, std::size_t label_dim);

  std::size_t size() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t label_dim() const noexcept { return label_dim_; }

  std::span<const std::uint32_t> indices() const noexcept { return indices_; }
  std::span<const float> values() const noexcept { return values_; }
  std::span<const std::size_t> offsets() const noexcept { return offsets_; }
  std::span<const std::uint32_t> label_indices() const noexcept { return label_indices_; }
  std::span<const std::size_t> label_offsets() const noexcept { return label_offsets_; }

  SparseExampleView example(std::size_t i) const;
  SparseBatchView view() const;

  friend bool operator==(const SparseBatch&, const SparseBatch&) = default;

 private:
  std::vector<std::uint32_t> indices_;
  std::vector<float> values_;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::uint32_t> label_indices_;
  std::vector<std::size_t> label_offsets_{0};
  std::size_t input_dim_ = 1;
  std::size_t label_dim_ = 1;
};

// Read-only window onto a contiguous run of examples. Payload arrays are
// shared with the owning SparseBatch, which must outlive the view; only
// the offsets are copied, re-based so offsets()[0] == 0.
class SparseBatchView {
 public:
  SparseBatchView() = default;

  std::size_t size() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t label_dim() const noexcept { return label_dim_; }

  std::span<const std::uint32_t> indices() const noexcept { return indices_; }
  std::span<const float> values() const noexcept { return values_; }
  std::span<const std::size_t> offsets() const noexcept { return offsets_; }
  std::span<const std::uint32_t> label_indices() const noexcept { return label_indices_; }
  std::span<const std::size_t> label_offsets() const noexcept { return label_offsets_; }

  SparseExampleView example(std::size_t i) const;

  // Start of the shared feature-index payload; lets tests confirm no copy happened.
  const void* payload_address() const noexcept { return indices_.data(); }

  SparseBatch to_owned() const;

  friend bool operator==(const SparseBatchView& a, const SparseBatchView& b);

 private:
  friend class SparseBatch;
  friend SparseBatchView slice_batch(const SparseBatchView&, std::size_t, std::size_t);

  std::span<const std::uint32_t> indices_;
  std::span<const float> values_;
  std::span<const std::uint32_t> label_indices_;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::size_t> label_offsets_{0};
  std::size_t input_dim_ = 1;
  std::size_t label_dim_ = 1;
};

// Examples [start, start + count) without copying payload; throws BoundsError.
SparseBatchView slice_batch(const SparseBatchView& b, std::size_t start, std::size_t count);

struct ParseOptions {
  bool one_based_features = false;
  bool one_based_labels = false;
};

// Lines are `l1,l2,...,lk i1:v1 i2:v2 ...`; blank lines are skipped. With no
// header argument the first non-blank line must be `num_examples input_dim
// label_dim`; if both are present they must agree. Feature indices may be
// unsorted in the file and come back sorted. Throws ParseError (with line
// number), RangeError, or FormatError (duplicates, example count mismatch).
SparseBatch parse_libsvm_multilabel(std::istream& in, std::optional<DatasetHeader> header = std::nullopt,
                                    ParseOptions options = {});
SparseBatch load_libsvm_multilabel(const std::filesystem::path& path,
                                   std::optional<DatasetHeader> header = std::nullopt,
                                   ParseOptions options = {});

// Inverse of the parser (0-based, shortest round-trip float text). Examples
// with neither labels nor features have no line form; they raise FormatError.
void write_libsvm_multilabel(std::ostream& out, const SparseBatchView& b, bool with_header = true);

struct FragmentedExample {
  std::vector<std::uint32_t> indices;
  std::vector<float> values;
  std::vector<std::uint32_t> labels;
};

struct FragmentedBatch {
  std::vector<FragmentedExample> examples;
  std::size_t input_dim = 1;
  std::size_t label_dim = 1;

  std::size_t size() const noexcept { return examples.size(); }
  SparseExampleView example(std::size_t i) const;
};

FragmentedBatch fragmented_copy(const SparseBatchView& b);
SparseBatch from_fragments(const FragmentedBatch& f);

}  // namespace lshtrain
