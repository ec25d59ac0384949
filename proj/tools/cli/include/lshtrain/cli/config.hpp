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

// Run configuration for the command-line tool. A config file is a flat JSON
// object of scalar keys. Keys not present take the value of the selected
// preset ("desk" unless the file or an override says otherwise); unknown
// keys are rejected.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lshtrain/trainer.hpp"
#include "lshtrain/synthetic.hpp"

namespace lshtrain::cli {

struct RunConfig {
  std::string preset = "desk";

  // Data. With an empty train_path both splits are generated in memory
  // from the synthetic_* keys, using input_dim and label_dim.
  std::string train_path;
  std::string test_path;
  bool one_based_features = false;
  bool one_based_labels = false;
  std::size_t input_dim = 0;  // 0: take it from the file header
  std::size_t label_dim = 0;
  std::size_t synthetic_train = 0;
  std::size_t synthetic_test = 0;
  std::size_t synthetic_nnz = 0;
  std::size_t synthetic_labels = 0;
  double synthetic_noise = 0.0;
  std::uint64_t synthetic_seed = 0;

  // Model.
  std::size_t hidden = 0;
  std::size_t hidden_layers = 0;
  bool output_lsh = true;
  bool hidden_lsh = false;
  std::string hash_family;
  std::uint32_t hash_k = 0;
  std::uint32_t hash_l = 0;
  std::uint32_t bin_size = 0;
  std::uint32_t densify_cap = 0;
  std::size_t min_active = 0;

  // Training.
  std::size_t batch_size = 0;
  std::size_t epochs = 0;
  int threads = 1;
  bool hogwild = false;
  std::size_t rehash_period = 0;
  std::size_t rebuild_every = 0;
  std::uint64_t seed = 0;
  std::string bf16_mode;
  std::string bf16_rounding;
  bool lanes = true;
  std::size_t lane_width = 0;
  double lr = 0.0;
  double beta1 = 0.0;
  double beta2 = 0.0;
  double eps = 0.0;
  bool bias_correction = true;

  // Outputs.
  std::string metrics_path;
  std::string checkpoint_path;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Preset values; throws ConfigError for an unknown name.
RunConfig preset_config(std::string_view name);
std::vector<std::string> preset_names();

// Builds a config from a JSON object: preset first, then every key on top.
// Throws ConfigError for unknown keys, wrong value types or invalid values.
RunConfig config_from_json(const nlohmann::json& j);
// Every key, in canonical (sorted) order.
nlohmann::json config_to_json(const RunConfig& cfg);
std::vector<std::string> config_keys();

// Throws ConfigError.
void validate(const RunConfig& cfg);

// `key=value` -> (key, value). The value is read as JSON when it parses as
// JSON and as a plain string otherwise, so `hash_family=simhash` and
// `lr=0.001` both work. Throws ConfigError when there is no '='.
std::pair<std::string, nlohmann::json> parse_assignment(std::string_view text);

// Layer stack, optimizer and loop settings for the trainer.
TrainConfig to_train_config(const RunConfig& cfg, std::size_t input_dim, std::size_t label_dim);
SyntheticSpec synthetic_spec(const RunConfig& cfg);

}  // namespace lshtrain::cli
