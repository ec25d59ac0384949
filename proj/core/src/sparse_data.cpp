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

#include "lshtrain/sparse_data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>
#include <string_view>

#include "lshtrain/error.hpp"

namespace lshtrain {

namespace {

void check_ragged(std::span<const std::uint32_t> idx, std::span<const std::size_t> offsets,
                  std::size_t dim, const char* what) {
  if (offsets.empty() || offsets.front() != 0) {
    throw FormatError(std::string(what) + ": offsets must start at 0");
  }
  if (offsets.back() != idx.size()) {
    throw FormatError(std::string(what) + ": last offset must equal payload length");
  }
  for (std::size_t e = 0; e + 1 < offsets.size(); ++e) {
    if (offsets[e] > offsets[e + 1]) throw FormatError(std::string(what) + ": offsets must be non-decreasing");
    for (std::size_t k = offsets[e]; k < offsets[e + 1]; ++k) {
      if (idx[k] >= dim) {
        throw RangeError(std::string(what) + " " + std::to_string(idx[k]) + " >= dimension " +
                         std::to_string(dim) + " in example " + std::to_string(e));
      }
      if (k > offsets[e] && idx[k] <= idx[k - 1]) {
        throw FormatError(std::string(what) + ": indices must be strictly increasing within example " +
                          std::to_string(e));
      }
    }
  }
}

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view tok, T& out) {
  if (tok.empty()) return false;
  if constexpr (std::is_floating_point_v<T>) {
    // from_chars rejects a leading '+'; accept it for hand-written files.
    if (tok.front() == '+') tok.remove_prefix(1);
  }
  const auto* end = tok.data() + tok.size();
  auto [p, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && p == end;
}

bool looks_like_header(const std::vector<std::string_view>& toks) {
  if (toks.size() != 3) return false;
  for (auto t : toks) {
    std::uint64_t v;
    if (t.find(':') != std::string_view::npos || t.find(',') != std::string_view::npos) return false;
    if (!parse_number(t, v)) return false;
  }
  return true;
}

std::uint32_t to_index(std::uint64_t raw, bool one_based, std::size_t dim, std::size_t line, const char* what) {
  if (one_based) {
    if (raw == 0) throw RangeError("line " + std::to_string(line) + ": " + what + " 0 in a 1-based file");
    --raw;
  }
  if (raw >= dim) {
    throw RangeError("line " + std::to_string(line) + ": " + what + " " + std::to_string(raw) +
                     " >= dimension " + std::to_string(dim));
  }
  return static_cast<std::uint32_t>(raw);
}

}  // namespace

// ---------------------------------------------------------------- SparseBatch

SparseBatch::SparseBatch(std::vector<std::uint32_t> indices, std::vector<float> values,
                         std::vector<std::size_t> offsets, std::vector<std::uint32_t> label_indices,
                         std::vector<std::size_t> label_offsets, std::size_t input_dim, std::size_t label_dim)
    : indices_(std::move(indices)),
      values_(std::move(values)),
      offsets_(std::move(offsets)),
      label_indices_(std::move(label_indices)),
      label_offsets_(std::move(label_offsets)),
      input_dim_(input_dim),
      label_dim_(label_dim) {
  if (input_dim_ == 0 || label_dim_ == 0) throw FormatError("input_dim and label_dim must be positive");
  if (values_.size() != indices_.size()) throw FormatError("indices and values differ in length");
  if (offsets_.size() != label_offsets_.size()) {
    throw FormatError("feature and label offsets describe different example counts");
  }
  check_ragged(indices_, offsets_, input_dim_, "feature index");
  check_ragged(label_indices_, label_offsets_, label_dim_, "label");
}

SparseBatch SparseBatch::empty(std::size_t input_dim, std::size_t label_dim) {
  return SparseBatch({}, {}, {0}, {}, {0}, input_dim, label_dim);
}

SparseExampleView SparseBatch::example(std::size_t i) const {
  if (i >= size()) throw BoundsError("example " + std::to_string(i) + " out of range");
  const std::size_t a = offsets_[i], b = offsets_[i + 1];
  const std::size_t la = label_offsets_[i], lb = label_offsets_[i + 1];
  return {std::span(indices_).subspan(a, b - a), std::span(values_).subspan(a, b - a),
          std::span(label_indices_).subspan(la, lb - la)};
}

SparseBatchView SparseBatch::view() const {
  SparseBatchView v;
  v.indices_ = indices_;
  v.values_ = values_;
  v.label_indices_ = label_indices_;
  v.offsets_ = offsets_;
  v.label_offsets_ = label_offsets_;
  v.input_dim_ = input_dim_;
  v.label_dim_ = label_dim_;
  return v;
}

// ---------------------------------------------------------------- views

SparseExampleView SparseBatchView::example(std::size_t i) const {
  if (i >= size()) throw BoundsError("example " + std::to_string(i) + " out of range");
  const std::size_t a = offsets_[i], b = offsets_[i + 1];
  const std::size_t la = label_offsets_[i], lb = label_offsets_[i + 1];
  return {indices_.subspan(a, b - a), values_.subspan(a, b - a), label_indices_.subspan(la, lb - la)};
}

SparseBatch SparseBatchView::to_owned() const {
  return SparseBatch({indices_.begin(), indices_.end()}, {values_.begin(), values_.end()}, offsets_,
                     {label_indices_.begin(), label_indices_.end()}, label_offsets_, input_dim_, label_dim_);
}

bool operator==(const SparseBatchView& a, const SparseBatchView& b) {
  return a.input_dim_ == b.input_dim_ && a.label_dim_ == b.label_dim_ && a.offsets_ == b.offsets_ &&
         a.label_offsets_ == b.label_offsets_ && std::ranges::equal(a.indices_, b.indices_) &&
         std::ranges::equal(a.values_, b.values_) && std::ranges::equal(a.label_indices_, b.label_indices_);
}

SparseBatchView slice_batch(const SparseBatchView& b, std::size_t start, std::size_t count) {
  if (start > b.size() || count > b.size() - start) {
    throw BoundsError("slice [" + std::to_string(start) + ", " + std::to_string(start) + "+" +
                      std::to_string(count) + ") exceeds " + std::to_string(b.size()) + " examples");
  }
  SparseBatchView v;
  v.input_dim_ = b.input_dim_;
  v.label_dim_ = b.label_dim_;
  const std::size_t f0 = b.offsets_[start], f1 = b.offsets_[start + count];
  const std::size_t l0 = b.label_offsets_[start], l1 = b.label_offsets_[start + count];
  v.indices_ = b.indices_.subspan(f0, f1 - f0);
  v.values_ = b.values_.subspan(f0, f1 - f0);
  v.label_indices_ = b.label_indices_.subspan(l0, l1 - l0);
  v.offsets_.resize(count + 1);
  v.label_offsets_.resize(count + 1);
  for (std::size_t k = 0; k <= count; ++k) {
    v.offsets_[k] = b.offsets_[start + k] - f0;
    v.label_offsets_[k] = b.label_offsets_[start + k] - l0;
  }
  return v;
}

// ---------------------------------------------------------------- text format

SparseBatch parse_libsvm_multilabel(std::istream& in, std::optional<DatasetHeader> header, ParseOptions options) {
  std::vector<std::uint32_t> indices;
  std::vector<float> values;
  std::vector<std::size_t> offsets{0};
  std::vector<std::uint32_t> labels;
  std::vector<std::size_t> label_offsets{0};
  std::vector<std::pair<std::uint32_t, float>> row;
  std::vector<std::uint32_t> row_labels;

  std::string line;
  std::size_t line_no = 0;
  bool seen_first = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = trim(line);
    if (body.empty()) continue;
    const auto toks = split_ws(body);

    if (!seen_first) {
      seen_first = true;
      if (looks_like_header(toks)) {
        DatasetHeader file_header;
        parse_number(toks[0], file_header.num_examples);
        parse_number(toks[1], file_header.input_dim);
        parse_number(toks[2], file_header.label_dim);
        if (file_header.input_dim == 0 || file_header.label_dim == 0) {
          throw ParseError(line_no, "header dimensions must be positive");
        }
        if (header && !(*header == file_header)) {
          throw FormatError("file header disagrees with the configured dataset header");
        }
        header = file_header;
        continue;
      }
      if (!header) throw FormatError("missing header line `num_examples input_dim label_dim`");
    }

    row.clear();
    row_labels.clear();
    std::size_t first_feature = 0;
    if (toks.front().find(':') == std::string_view::npos) {
      first_feature = 1;
      std::string_view rest = toks.front();
      while (true) {
        const auto comma = rest.find(',');
        const auto piece = rest.substr(0, comma);
        std::uint64_t raw;
        if (!parse_number(piece, raw)) throw ParseError(line_no, "malformed label '" + std::string(piece) + "'");
        row_labels.push_back(to_index(raw, options.one_based_labels, header->label_dim, line_no, "label"));
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
      }
    }
    for (std::size_t t = first_feature; t < toks.size(); ++t) {
      const auto tok = toks[t];
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos) throw ParseError(line_no, "expected index:value, got '" + std::string(tok) + "'");
      std::uint64_t raw;
      float v;
      if (!parse_number(tok.substr(0, colon), raw) || !parse_number(tok.substr(colon + 1), v)) {
        throw ParseError(line_no, "malformed feature '" + std::string(tok) + "'");
      }
      row.emplace_back(to_index(raw, options.one_based_features, header->input_dim, line_no, "feature index"), v);
    }

    std::ranges::sort(row, {}, &std::pair<std::uint32_t, float>::first);
    for (std::size_t k = 1; k < row.size(); ++k) {
      if (row[k].first == row[k - 1].first) {
        throw FormatError("line " + std::to_string(line_no) + ": duplicate feature index " + std::to_string(row[k].first));
      }
    }
    std::ranges::sort(row_labels);
    if (std::adjacent_find(row_labels.begin(), row_labels.end()) != row_labels.end()) {
      throw FormatError("line " + std::to_string(line_no) + ": duplicate label");
    }
    for (const auto& [i, v] : row) {
      indices.push_back(i);
      values.push_back(v);
    }
    offsets.push_back(indices.size());
    labels.insert(labels.end(), row_labels.begin(), row_labels.end());
    label_offsets.push_back(labels.size());
  }
  if (in.bad()) throw Error("read error while parsing dataset");
  if (!header) throw FormatError("missing header line `num_examples input_dim label_dim`");

  const std::size_t parsed = offsets.size() - 1;
  if (parsed != header->num_examples) {
    throw FormatError("header declares " + std::to_string(header->num_examples) + " examples, found " +
                      std::to_string(parsed));
  }
  return SparseBatch(std::move(indices), std::move(values), std::move(offsets), std::move(labels),
                     std::move(label_offsets), header->input_dim, header->label_dim);
}

SparseBatch load_libsvm_multilabel(const std::filesystem::path& path, std::optional<DatasetHeader> header,
                                   ParseOptions options) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset '" + path.string() + "'");
  return parse_libsvm_multilabel(in, header, options);
}

void write_libsvm_multilabel(std::ostream& out, const SparseBatchView& b, bool with_header) {
  if (with_header) out << b.size() << ' ' << b.input_dim() << ' ' << b.label_dim() << '\n';
  char buf[64];
  for (std::size_t e = 0; e < b.size(); ++e) {
    const auto ex = b.example(e);
    if (ex.labels.empty() && ex.indices.empty()) {
      throw FormatError("example " + std::to_string(e) + " has no labels and no features");
    }
    for (std::size_t k = 0; k < ex.labels.size(); ++k) {
      if (k) out << ',';
      out << ex.labels[k];
    }
    for (std::size_t k = 0; k < ex.indices.size(); ++k) {
      if (k || !ex.labels.empty()) out << ' ';
      auto [p, ec] = std::to_chars(buf, buf + sizeof buf, ex.values[k]);
      out << ex.indices[k] << ':' << std::string_view(buf, static_cast<std::size_t>(p - buf));
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------- fragmented

SparseExampleView FragmentedBatch::example(std::size_t i) const {
  const auto& e = examples.at(i);
  return {e.indices, e.values, e.labels};
}

FragmentedBatch fragmented_copy(const SparseBatchView& b) {
  FragmentedBatch f;
  f.input_dim = b.input_dim();
  f.label_dim = b.label_dim();
  f.examples.reserve(b.size());
  for (std::size_t e = 0; e < b.size(); ++e) {
    const auto ex = b.example(e);
    f.examples.push_back({{ex.indices.begin(), ex.indices.end()},
                          {ex.values.begin(), ex.values.end()},
                          {ex.labels.begin(), ex.labels.end()}});
  }
  return f;
}

SparseBatch from_fragments(const FragmentedBatch& f) {
  std::vector<std::uint32_t> indices;
  std::vector<float> values;
  std::vector<std::size_t> offsets{0};
  std::vector<std::uint32_t> labels;
  std::vector<std::size_t> label_offsets{0};
  for (const auto& e : f.examples) {
    if (e.indices.size() != e.values.size()) throw FormatError("fragment indices and values differ in length");
    indices.insert(indices.end(), e.indices.begin(), e.indices.end());
    values.insert(values.end(), e.values.begin(), e.values.end());
    offsets.push_back(indices.size());
    labels.insert(labels.end(), e.labels.begin(), e.labels.end());
    label_offsets.push_back(labels.size());
  }
  return SparseBatch(std::move(indices), std::move(values), std::move(offsets), std::move(labels),
                     std::move(label_offsets), f.input_dim, f.label_dim);
}

}  // namespace lshtrain
