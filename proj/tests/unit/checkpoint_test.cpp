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

#include "lshtrain/checkpoint.hpp"

#include <sstream>

#include <gtest/gtest.h>

#include "lshtrain/error.hpp"
#include "lshtrain/trainer.hpp"

namespace lshtrain {
namespace {

std::vector<LayerConfig> layers(std::size_t hidden) {
  LayerConfig h;
  h.n = hidden;
  h.m = 30;
  h.order = StorageOrder::ColMajor;
  LayerConfig o;
  o.n = 40;
  o.m = hidden;
  o.activation = Activation::SoftmaxOverActive;
  o.use_lsh = true;
  o.hash.k = 2;
  o.hash.l = 4;
  return {h, o};
}

TEST(CheckpointTest, RoundTripRestoresWeightsAndTables) {
  Network a(layers(8), 1);
  for (std::size_t i = 0; i < 40; ++i) a.layer_mut(1).weights_mut().set(i, i % 8, 3.0f);
  a.rebuild_tables();
  Network b(layers(8), 1);
  EXPECT_FALSE(b.layer(1).tables()->same_contents(*a.layer(1).tables()));
  std::stringstream buf;
  save_checkpoint(a, buf);
  load_checkpoint(b, buf);
  for (std::size_t l = 0; l < 2; ++l) EXPECT_EQ(a.layer(l).weights(), b.layer(l).weights());
  EXPECT_TRUE(b.layer(1).tables()->same_contents(*a.layer(1).tables()));
}

TEST(CheckpointTest, Bf16WeightsRoundTrip) {
  Network a(layers(8), 1);
  a.set_quant_mode(QuantMode::WeightsAndActivations);
  Network b(layers(8), 2);
  b.set_quant_mode(QuantMode::WeightsAndActivations);
  std::stringstream buf;
  save_checkpoint(a, buf);
  load_checkpoint(b, buf);
  for (std::size_t l = 0; l < 2; ++l) EXPECT_EQ(a.layer(l).weights(), b.layer(l).weights());
}

TEST(CheckpointTest, ShapeMismatchIsRejected) {
  const Network a(layers(8), 1);
  Network b(layers(9), 1);
  std::stringstream buf;
  save_checkpoint(a, buf);
  EXPECT_THROW(load_checkpoint(b, buf), FormatError);
}

TEST(CheckpointTest, BadMagicAndTruncation) {
  Network b(layers(8), 1);
  std::stringstream junk("NOTACKPT........");
  EXPECT_THROW(load_checkpoint(b, junk), FormatError);
  std::stringstream buf;
  save_checkpoint(b, buf);
  std::string s = buf.str();
  s.resize(s.size() - 3);
  std::stringstream cut(s);
  EXPECT_THROW(load_checkpoint(b, cut), FormatError);
}

}  // namespace
}  // namespace lshtrain
