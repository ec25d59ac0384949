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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lshtrain/cli/config.hpp"
#include "lshtrain/error.hpp"
#include "lshtrain/sparse_data.hpp"

namespace lshtrain::cli {

// A required input file does not exist. Reported with exit code 2.
class MissingFileError : public Error {
 public:
  using Error::Error;
};

// Command-line flags, applied on top of the config file in this order:
// every --set assignment, then the dedicated flags.
struct Overrides {
  std::vector<std::string> set;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
  bool no_lanes = false;
  std::optional<std::string> bf16;
  std::optional<std::string> metrics;
  std::optional<std::string> checkpoint;
};

// An empty path means "no file": the desk preset plus overrides.
RunConfig load_run_config(const std::filesystem::path& config_path, const Overrides& overrides);

struct Datasets {
  SparseBatch train;
  SparseBatch test;  // the training set again when no test split is configured
};
Datasets load_datasets(const RunConfig& cfg);

enum class Ablation { Avx, Bf16, Layout };
Ablation parse_ablation(std::string_view s);
std::string_view to_string(Ablation a) noexcept;

struct BenchRow {
  std::string ablation;
  std::string variant;
  std::size_t epochs = 0;
  double mean_epoch_seconds = 0.0;
  double final_loss = 0.0;
  double p_at_1 = 0.0;
  double ratio_to_first = 0.0;  // mean_epoch_seconds / first row's mean_epoch_seconds
};

// Trains every variant of the ablation from the same seed, one epoch of
// each in turn so that machine drift hits all variants alike. The first
// row is the reference: lanes off, fp32, or fragmented examples.
std::vector<BenchRow> run_ablation(const RunConfig& cfg, const Datasets& data, Ablation ablation,
                                   std::ostream* log = nullptr);

void write_bench_header(std::ostream& out);
void write_bench_rows(std::ostream& out, const std::vector<BenchRow>& rows);

// Entry points. They report problems on `err` and return the exit code:
// 0 on success, 2 for a missing file or bad configuration, 1 otherwise.
int run_train(const std::filesystem::path& config_path, const Overrides& overrides, std::ostream& out,
              std::ostream& err);
int run_eval(const std::filesystem::path& config_path, const Overrides& overrides, std::ostream& out,
             std::ostream& err);
// The CSV goes to `csv_path`, or to `out` when the path is empty.
int run_bench(const std::filesystem::path& config_path, std::string_view ablation, const Overrides& overrides,
              const std::filesystem::path& csv_path, std::ostream& out, std::ostream& err);

}  // namespace lshtrain::cli
