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

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "lshtrain/error.hpp"
#include "random_inputs.hpp"

namespace lshtrain {
namespace {

using testing::random_batch;
using testing::uniform_size;

SparseBatch parse(const std::string& text, std::optional<DatasetHeader> h = std::nullopt, ParseOptions o = {}) {
  std::istringstream in(text);
  return parse_libsvm_multilabel(in, h, o);
}

TEST(ParseTest, EmptyInputWithZeroExamples) {
  const SparseBatch b = parse("", DatasetHeader{0, 4, 4});
  EXPECT_EQ(b.size(), 0u);
  EXPECT_EQ(std::vector<std::size_t>(b.offsets().begin(), b.offsets().end()), std::vector<std::size_t>{0});
  EXPECT_TRUE(b.indices().empty());
  EXPECT_TRUE(b.label_indices().empty());
}

TEST(ParseTest, SingleExample) {
  const SparseBatch b = parse("3 0:1.0\n", DatasetHeader{1, 4, 4});
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b.indices()[0], 0u);
  EXPECT_EQ(b.values()[0], 1.0f);
  EXPECT_EQ(b.offsets()[1], 1u);
  EXPECT_EQ(b.label_indices()[0], 3u);
  EXPECT_EQ(b.label_offsets()[1], 1u);
}

TEST(ParseTest, HeaderLineSortingAndOneBased) {
  const SparseBatch b = parse("2 5 3\n1,2 4:0.5 2:-1\n\n3 1:2e-1\n", std::nullopt, {true, true});
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b.input_dim(), 5u);
  const SparseExampleView e0 = b.example(0);
  EXPECT_EQ(std::vector<std::uint32_t>(e0.indices.begin(), e0.indices.end()), (std::vector<std::uint32_t>{1, 3}));
  EXPECT_EQ(std::vector<float>(e0.values.begin(), e0.values.end()), (std::vector<float>{-1.0f, 0.5f}));
  EXPECT_EQ(std::vector<std::uint32_t>(e0.labels.begin(), e0.labels.end()), (std::vector<std::uint32_t>{0, 1}));
  EXPECT_EQ(b.example(1).indices[0], 0u);
}

TEST(ParseTest, ExampleWithoutLabels) {
  const SparseBatch b = parse("1 3 2\n 0:1 2:1\n");
  EXPECT_TRUE(b.example(0).labels.empty());
  EXPECT_EQ(b.example(0).indices.size(), 2u);
}

TEST(ParseTest, Errors) {
  const DatasetHeader h{1, 4, 4};
  try {
    parse("0 1:x\n", h);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
  try {
    parse("2 3 3\n0 1:1\n0 1:1 :3\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(parse("0 4:1\n", h), RangeError);
  EXPECT_THROW(parse("4 0:1\n", h), RangeError);
  EXPECT_THROW(parse("0 1:1 1:2\n", h), FormatError);
  EXPECT_THROW(parse("0 1:1\n0 2:1\n", h), FormatError);  // count mismatch
  EXPECT_THROW(parse("0 1:1\n"), FormatError);              // no header
  EXPECT_THROW(parse("1 4 4\n0 1:1\n", DatasetHeader{1, 5, 4}), FormatError);
}

TEST(ParseTest, WriteParseRoundTrip) {
  std::mt19937_64 gen(1);
  for (int rep = 0; rep < 20; ++rep) {
    const SparseBatch b = random_batch(gen, 100, 300, 40);
    std::ostringstream out;
    write_libsvm_multilabel(out, b.view());
    EXPECT_EQ(parse(out.str()), b);
  }
}

TEST(ParseTest, LoadMissingFile) {
  EXPECT_THROW(load_libsvm_multilabel("/nonexistent/file.txt"), Error);
}

TEST(SparseBatchTest, ConstructorChecksInvariants) {
  EXPECT_THROW(SparseBatch({0}, {1.0f}, {1, 1}, {}, {0, 0}, 4, 4), FormatError);
  EXPECT_THROW(SparseBatch({0}, {1.0f, 2.0f}, {0, 1}, {}, {0, 0}, 4, 4), FormatError);
  EXPECT_THROW(SparseBatch({2, 1}, {1.0f, 1.0f}, {0, 2}, {}, {0, 0}, 4, 4), FormatError);
  EXPECT_THROW(SparseBatch({9}, {1.0f}, {0, 1}, {}, {0, 0}, 4, 4), RangeError);
  EXPECT_THROW(SparseBatch({0}, {1.0f}, {0, 1}, {7}, {0, 1}, 4, 4), RangeError);
  EXPECT_THROW(SparseBatch({0}, {1.0f}, {0, 1}, {}, {0, 0, 0}, 4, 4), FormatError);
  EXPECT_NO_THROW(SparseBatch({0, 3}, {1.0f, 1.0f}, {0, 2}, {1}, {0, 1}, 4, 4));
}

TEST(SliceTest, IdentityAndSingle) {
  std::mt19937_64 gen(2);
  const SparseBatch b = random_batch(gen, 30, 50, 10);
  EXPECT_TRUE(slice_batch(b.view(), 0, b.size()) == b.view());
  for (std::size_t k = 0; k < b.size(); ++k) {
    const SparseBatchView s = slice_batch(b.view(), k, 1);
    ASSERT_EQ(s.size(), 1u);
    EXPECT_TRUE(std::equal(s.example(0).indices.begin(), s.example(0).indices.end(), b.example(k).indices.begin(),
                           b.example(k).indices.end()));
    EXPECT_EQ(s.offsets()[0], 0u);
  }
  EXPECT_THROW(slice_batch(b.view(), 25, 6), BoundsError);
  EXPECT_EQ(slice_batch(b.view(), 30, 0).size(), 0u);
}

TEST(SliceTest, ConcatenationReproducesBatch) {
  std::mt19937_64 gen(3);
  for (int rep = 0; rep < 50; ++rep) {
    const SparseBatch b = random_batch(gen, uniform_size(gen, 1, 40), 60, 12);
    const std::size_t s = uniform_size(gen, 0, b.size());
    const SparseBatch left = slice_batch(b.view(), 0, s).to_owned();
    const SparseBatch right = slice_batch(b.view(), s, b.size() - s).to_owned();
    std::vector<std::uint32_t> idx(left.indices().begin(), left.indices().end());
    idx.insert(idx.end(), right.indices().begin(), right.indices().end());
    std::vector<float> val(left.values().begin(), left.values().end());
    val.insert(val.end(), right.values().begin(), right.values().end());
    std::vector<std::uint32_t> lab(left.label_indices().begin(), left.label_indices().end());
    lab.insert(lab.end(), right.label_indices().begin(), right.label_indices().end());
    std::vector<std::size_t> off(left.offsets().begin(), left.offsets().end());
    for (std::size_t k = 1; k < right.offsets().size(); ++k) off.push_back(left.indices().size() + right.offsets()[k]);
    std::vector<std::size_t> loff(left.label_offsets().begin(), left.label_offsets().end());
    for (std::size_t k = 1; k < right.label_offsets().size(); ++k) {
      loff.push_back(left.label_indices().size() + right.label_offsets()[k]);
    }
    EXPECT_EQ(SparseBatch(idx, val, off, lab, loff, b.input_dim(), b.label_dim()), b);
  }
}

TEST(SliceTest, ViewsShareThePayload) {
  std::mt19937_64 gen(4);
  const SparseBatch b = random_batch(gen, 20, 50, 10, 5);
  const SparseBatchView v = b.view();
  EXPECT_EQ(v.payload_address(), static_cast<const void*>(b.indices().data()));
  const SparseBatchView s = slice_batch(v, 5, 10);
  EXPECT_EQ(s.payload_address(), static_cast<const void*>(b.indices().data() + b.offsets()[5]));
  EXPECT_EQ(s.values().data(), b.values().data() + b.offsets()[5]);
}

TEST(FragmentedTest, EmptyAndSingle) {
  const SparseBatch empty = SparseBatch::empty(5, 5);
  EXPECT_EQ(fragmented_copy(empty.view()).size(), 0u);
  const SparseBatch one = parse("3 0:1.0\n", DatasetHeader{1, 4, 4});
  const FragmentedBatch f = fragmented_copy(one.view());
  ASSERT_EQ(f.size(), 1u);
  EXPECT_EQ(f.examples[0].indices, std::vector<std::uint32_t>{0});
  EXPECT_EQ(f.examples[0].values, std::vector<float>{1.0f});
  EXPECT_EQ(f.examples[0].labels, std::vector<std::uint32_t>{3});
}

TEST(FragmentedTest, RoundTrip) {
  std::mt19937_64 gen(5);
  for (int rep = 0; rep < 20; ++rep) {
    const SparseBatch b = random_batch(gen, uniform_size(gen, 0, 60), 80, 20);
    const FragmentedBatch f = fragmented_copy(b.view());
    EXPECT_EQ(from_fragments(f), b);
    for (std::size_t k = 0; k < f.size(); ++k) {
      EXPECT_TRUE(std::equal(f.example(k).values.begin(), f.example(k).values.end(), b.example(k).values.begin(),
                             b.example(k).values.end()));
    }
  }
}

}  // namespace
}  // namespace lshtrain
