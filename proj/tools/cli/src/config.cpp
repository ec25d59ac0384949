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

#include "lshtrain/cli/config.hpp"

#include <algorithm>
#include <limits>
#include <type_traits>

#include <omp.h>

#include "lshtrain/error.hpp"

namespace lshtrain::cli {

namespace {

template <typename Cfg, typename F>
void visit_fields(Cfg& c, F&& f) {
  f("preset", c.preset);
  f("train_path", c.train_path);
  f("test_path", c.test_path);
  f("one_based_features", c.one_based_features);
  f("one_based_labels", c.one_based_labels);
  f("input_dim", c.input_dim);
  f("label_dim", c.label_dim);
  f("synthetic_train", c.synthetic_train);
  f("synthetic_test", c.synthetic_test);
  f("synthetic_nnz", c.synthetic_nnz);
  f("synthetic_labels", c.synthetic_labels);
  f("synthetic_noise", c.synthetic_noise);
  f("synthetic_seed", c.synthetic_seed);
  f("hidden", c.hidden);
  f("hidden_layers", c.hidden_layers);
  f("output_lsh", c.output_lsh);
  f("hidden_lsh", c.hidden_lsh);
  f("hash_family", c.hash_family);
  f("hash_k", c.hash_k);
  f("hash_l", c.hash_l);
  f("bin_size", c.bin_size);
  f("densify_cap", c.densify_cap);
  f("min_active", c.min_active);
  f("batch_size", c.batch_size);
  f("epochs", c.epochs);
  f("threads", c.threads);
  f("hogwild", c.hogwild);
  f("rehash_period", c.rehash_period);
  f("rebuild_every", c.rebuild_every);
  f("seed", c.seed);
  f("bf16_mode", c.bf16_mode);
  f("bf16_rounding", c.bf16_rounding);
  f("lanes", c.lanes);
  f("lane_width", c.lane_width);
  f("lr", c.lr);
  f("beta1", c.beta1);
  f("beta2", c.beta2);
  f("eps", c.eps);
  f("bias_correction", c.bias_correction);
  f("metrics_path", c.metrics_path);
  f("checkpoint_path", c.checkpoint_path);
}

template <typename T>
void assign(const std::string& key, const nlohmann::json& v, T& out) {
  const auto bad = [&](const char* want) {
    return ConfigError("config key '" + key + "' expects " + want + ", got " + v.dump());
  };
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw bad("a boolean");
    out = v.get<bool>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw bad("a string");
    out = v.get<std::string>();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw bad("a number");
    out = v.get<T>();
  } else if constexpr (std::is_unsigned_v<T>) {
    if (!v.is_number_unsigned()) throw bad("a non-negative integer");
    const auto u = v.get<std::uint64_t>();
    if (u > std::numeric_limits<T>::max()) throw bad("a smaller integer");
    out = static_cast<T>(u);
  } else {
    if (!v.is_number_integer()) throw bad("an integer");
    const auto s = v.get<std::int64_t>();
    if (s < std::numeric_limits<T>::min() || s > std::numeric_limits<T>::max()) throw bad("a smaller integer");
    out = static_cast<T>(s);
  }
}

RunConfig desk_preset() {
  RunConfig c;
  c.preset = "desk";
  c.input_dim = 2000;
  c.label_dim = 1000;
  c.synthetic_train = 8000;
  c.synthetic_test = 2000;
  c.synthetic_nnz = 20;
  c.synthetic_labels = 1;
  c.synthetic_noise = 0.2;
  c.synthetic_seed = 1;
  c.hidden = 64;
  c.hidden_layers = 1;
  c.output_lsh = true;
  c.hidden_lsh = false;
  c.hash_family = "dwta";
  c.hash_k = 3;
  c.hash_l = 16;
  c.bin_size = 8;
  c.densify_cap = 100;
  c.min_active = 16;
  c.batch_size = 128;
  c.epochs = 10;
  c.threads = 1;
  c.rehash_period = 10;
  c.rebuild_every = 20;
  c.seed = 42;
  c.bf16_mode = "none";
  c.bf16_rounding = "truncate";
  c.lanes = true;
  c.lane_width = 16;
  c.lr = 3e-3;
  c.beta1 = 0.9;
  c.beta2 = 0.999;
  c.eps = 1e-8;
  c.bias_correction = true;
  c.metrics_path = "metrics.csv";
  c.checkpoint_path = "model.ckpt";
  return c;
}

RunConfig full_preset() {
  RunConfig c = desk_preset();
  c.preset = "full";
  // Dimensions are taken from the dataset headers.
  c.input_dim = 0;
  c.label_dim = 0;
  c.hidden = 128;
  c.hash_k = 6;
  c.hash_l = 400;
  c.min_active = 1;
  c.batch_size = 1024;
  c.threads = 0;
  c.rehash_period = 50;
  c.lr = 1e-4;
  return c;
}

}  // namespace

std::vector<std::string> preset_names() { return {"desk", "full"}; }

RunConfig preset_config(std::string_view name) {
  if (name == "desk") return desk_preset();
  if (name == "full") return full_preset();
  throw ConfigError("unknown preset '" + std::string(name) + "' (expected desk or full)");
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  RunConfig c;
  visit_fields(c, [&](const char* name, auto&) { keys.emplace_back(name); });
  return keys;
}

RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  std::string preset = "desk";
  if (auto it = j.find("preset"); it != j.end()) assign("preset", *it, preset);
  RunConfig c = preset_config(preset);
  const std::vector<std::string> keys = config_keys();
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(keys.begin(), keys.end(), it.key()) == keys.end()) {
      throw ConfigError("unknown config key '" + it.key() + "'");
    }
    if (it.value().is_structured()) throw ConfigError("config key '" + it.key() + "' must be a scalar");
  }
  visit_fields(c, [&](const char* name, auto& field) {
    if (auto it = j.find(name); it != j.end()) assign(name, *it, field);
  });
  validate(c);
  return c;
}

nlohmann::json config_to_json(const RunConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  visit_fields(cfg, [&](const char* name, const auto& field) { j[name] = field; });
  return j;
}

void validate(const RunConfig& c) {
  preset_config(c.preset);
  const auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  if (c.train_path.empty()) {
    require(c.input_dim > 0 && c.label_dim > 0, "synthetic data needs input_dim and label_dim");
    require(c.synthetic_train > 0, "synthetic_train must be >= 1");
    SyntheticSpec spec = synthetic_spec(c);
    spec.validate();
  }
  require(c.hidden_layers == 0 || c.hidden > 0, "hidden must be >= 1");
  parse_hash_family(c.hash_family);
  require(c.hash_k > 0 && c.hash_l > 0, "hash_k and hash_l must be >= 1");
  require(c.min_active > 0, "min_active must be >= 1");
  require(c.batch_size > 0, "batch_size must be >= 1");
  require(c.threads >= 0, "threads must be >= 0 (0 uses every available thread)");
  require(c.rehash_period > 0, "rehash_period must be >= 1");
  require(c.rebuild_every > 0, "rebuild_every must be >= 1");
  parse_quant_mode(c.bf16_mode);
  parse_bf16_rounding(c.bf16_rounding);
  LaneConfig{c.lane_width, c.lanes}.validate();
  require(c.lr >= 0.0, "lr must be >= 0");
  require(c.beta1 >= 0.0 && c.beta1 < 1.0 && c.beta2 >= 0.0 && c.beta2 < 1.0, "beta1 and beta2 must be in [0, 1)");
  require(c.eps > 0.0, "eps must be > 0");
}

std::pair<std::string, nlohmann::json> parse_assignment(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(text) + "' is not of the form key=value");
  }
  std::string key(text.substr(0, eq));
  std::string raw(text.substr(eq + 1));
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  return {std::move(key), std::move(value)};
}

SyntheticSpec synthetic_spec(const RunConfig& c) {
  SyntheticSpec s;
  s.num_examples = c.synthetic_train;
  s.input_dim = c.input_dim;
  s.label_dim = c.label_dim;
  s.nnz = c.synthetic_nnz;
  s.labels_per_example = c.synthetic_labels;
  s.noise = c.synthetic_noise;
  s.seed = c.synthetic_seed;
  return s;
}

TrainConfig to_train_config(const RunConfig& c, std::size_t input_dim, std::size_t label_dim) {
  validate(c);
  HashFamilyParams hash;
  hash.family = parse_hash_family(c.hash_family);
  hash.k = c.hash_k;
  hash.l = c.hash_l;
  hash.bin_size = c.bin_size;
  hash.densify_cap = c.densify_cap;

  TrainConfig t;
  std::size_t fan_in = input_dim;
  for (std::size_t h = 0; h < c.hidden_layers; ++h) {
    LayerConfig l;
    l.n = c.hidden;
    l.m = fan_in;
    l.activation = Activation::ReLU;
    l.use_lsh = c.hidden_lsh;
    l.hash = hash;
    l.min_active = c.min_active;
    // Sparse input needs the column-major product; later layers see dense input.
    l.order = h == 0 ? StorageOrder::ColMajor : StorageOrder::RowMajor;
    t.layers.push_back(l);
    fan_in = c.hidden;
  }
  LayerConfig out;
  out.n = label_dim;
  out.m = fan_in;
  out.activation = Activation::SoftmaxOverActive;
  out.use_lsh = c.output_lsh;
  out.hash = hash;
  out.min_active = c.min_active;
  out.order = c.hidden_layers == 0 ? StorageOrder::ColMajor : StorageOrder::RowMajor;
  t.layers.push_back(out);

  t.batch_size = c.batch_size;
  t.epochs = c.epochs;
  t.threads = c.threads == 0 ? std::max(omp_get_max_threads(), 1) : c.threads;
  t.hogwild = c.hogwild;
  t.rehash_period = c.rehash_period;
  t.rebuild_every = c.rebuild_every;
  t.seed = c.seed;
  t.bf16_mode = parse_quant_mode(c.bf16_mode);
  t.bf16_rounding = parse_bf16_rounding(c.bf16_rounding);
  t.lanes = LaneConfig{c.lane_width, c.lanes};
  t.adam.lr = static_cast<float>(c.lr);
  t.adam.beta1 = static_cast<float>(c.beta1);
  t.adam.beta2 = static_cast<float>(c.beta2);
  t.adam.eps = static_cast<float>(c.eps);
  t.adam.bias_correction = c.bias_correction;
  t.validate();
  return t;
}

}  // namespace lshtrain::cli
