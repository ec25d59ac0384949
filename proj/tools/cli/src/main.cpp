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

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "lshtrain/cli/commands.hpp"

namespace {

void add_common(CLI::App* cmd, std::string& config, lshtrain::cli::Overrides& o) {
  cmd->add_option("--config", config, "JSON config file (flat object of scalar keys)");
  cmd->add_option("--threads", o.threads, "worker threads (0: all available)");
  cmd->add_option("--seed", o.seed, "network and sampling seed");
  cmd->add_flag("--no-lanes", o.no_lanes, "use the scalar kernels");
  cmd->add_option("--bf16", o.bf16, "bf16 mode")->check(CLI::IsMember({"both", "activations", "none"}));
  cmd->add_option("--metrics", o.metrics, "metrics CSV path");
  cmd->add_option("--checkpoint", o.checkpoint, "checkpoint path");
  cmd->add_option("--set", o.set, "override any config key, as key=value");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse wide-network trainer with LSH-selected active neurons"};
  app.require_subcommand(1, 1);

  std::string config;
  lshtrain::cli::Overrides overrides;
  std::string ablation;
  std::string out_path;

  CLI::App* train = app.add_subcommand("train", "train a network and write metrics and a checkpoint");
  add_common(train, config, overrides);
  CLI::App* eval = app.add_subcommand("eval", "report P@1 of a checkpoint on the test split");
  add_common(eval, config, overrides);
  CLI::App* bench = app.add_subcommand("bench", "run an ablation and write the comparison CSV");
  add_common(bench, config, overrides);
  bench->add_option("--ablation", ablation, "which comparison to run")
      ->required()
      ->check(CLI::IsMember({"avx", "bf16", "layout"}));
  bench->add_option("--out", out_path, "CSV path (default: standard output)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (train->parsed()) return lshtrain::cli::run_train(config, overrides, std::cout, std::cerr);
  if (eval->parsed()) return lshtrain::cli::run_eval(config, overrides, std::cout, std::cerr);
  return lshtrain::cli::run_bench(config, ablation, overrides, out_path, std::cout, std::cerr);
}
