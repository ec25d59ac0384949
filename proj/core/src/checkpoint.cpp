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

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "lshtrain/error.hpp"

namespace lshtrain {

namespace {

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError("checkpoint: unexpected end of file");
  return v;
}

template <typename T>
void get_array(std::istream& in, std::span<T> out) {
  if (!in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size_bytes()))) {
    throw FormatError("checkpoint: unexpected end of file");
  }
}

}  // namespace

void save_checkpoint(const Network& net, std::ostream& out) {
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.num_layers()));
  for (const Layer& layer : net.layers()) {
    const LayerWeights& w = layer.weights();
    put<std::uint64_t>(out, w.n());
    put<std::uint64_t>(out, w.m());
    put<std::uint8_t>(out, w.order() == StorageOrder::RowMajor ? 0 : 1);
    put<std::uint8_t>(out, w.precision() == Precision::Fp32 ? 0 : 1);
    put<std::uint8_t>(out, layer.config().activation == Activation::ReLU ? 0 : 1);
    put<std::uint8_t>(out, 0);
    if (w.precision() == Precision::Fp32) {
      const auto d = w.fp32().data;
      out.write(reinterpret_cast<const char*>(d.data()), static_cast<std::streamsize>(d.size_bytes()));
    } else {
      const auto d = w.bf16().data;
      out.write(reinterpret_cast<const char*>(d.data()), static_cast<std::streamsize>(d.size_bytes()));
    }
    const auto b = w.bias();
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size_bytes()));
  }
  if (!out) throw Error("checkpoint: write failed");
}

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  save_checkpoint(net, out);
}

void load_checkpoint(Network& net, std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw FormatError("checkpoint: bad magic");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  const auto layers = get<std::uint32_t>(in);
  if (layers != net.num_layers()) throw FormatError("checkpoint: layer count does not match the network");
  for (std::size_t l = 0; l < layers; ++l) {
    LayerWeights& w = net.layer_mut(l).weights_mut();
    const auto n = get<std::uint64_t>(in);
    const auto m = get<std::uint64_t>(in);
    const auto order = get<std::uint8_t>(in);
    const auto precision = get<std::uint8_t>(in);
    const auto activation = get<std::uint8_t>(in);
    get<std::uint8_t>(in);
    const StorageOrder want = w.order();
    if (n != w.n() || m != w.m() || order != (want == StorageOrder::RowMajor ? 0 : 1) || precision > 1 ||
        activation != (net.layer(l).config().activation == Activation::ReLU ? 0 : 1)) {
      throw FormatError("checkpoint: layer " + std::to_string(l) + " shape does not match the network");
    }
    const Precision current = w.precision();
    if (precision == 0) {
      w.set_precision(Precision::Fp32);
      get_array(in, w.fp32_mut().data);
    } else {
      w.set_precision(Precision::Bf16);
      get_array(in, w.bf16_mut().data);
    }
    get_array(in, w.bias_mut());
    w.set_precision(current, net.rounding());
  }
  net.rebuild_tables();
}

void load_checkpoint(Network& net, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  load_checkpoint(net, in);
}

}  // namespace lshtrain
