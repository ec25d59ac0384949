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

// The training loop. Each batch runs in three phases: samples are split
// into contiguous chunks across threads and processed independently against
// the same weights; after the barrier one ADAM step applies the batch's
// gradient; every rehash_period batches the hash tables are brought up to
// date with the moved weights.
//
// Deterministic mode keeps each sample's gradient blocks and adds them in
// sample order after the barrier, so the result is the same for any thread
// count. HOGWILD mode adds them into the shared buffers as soon as they are
// computed, without locks.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "lshtrain/nn.hpp"
#include "lshtrain/optimizer.hpp"
#include "lshtrain/sparse_data.hpp"

namespace lshtrain {

struct TrainConfig {
  std::vector<LayerConfig> layers;
  std::size_t batch_size = 1024;
  std::size_t epochs = 1;
  int threads = 1;
  bool hogwild = false;
  std::size_t rehash_period = 50;  // batches between maintenance rounds
  std::size_t rebuild_every = 20;  // maintenance rounds between full rebuilds
  std::uint64_t seed = 0;
  QuantMode bf16_mode = QuantMode::None;
  Bf16Rounding bf16_rounding = Bf16Rounding::Truncate;
  LaneConfig lanes;
  AdamHyper adam;
  // Keep per-sample output active-set sizes of the last epoch.
  bool record_traces = false;

  // Throws ConfigError.
  void validate() const;
};

// Network described by cfg.layers, seeded with cfg.seed.
Network build_network(const TrainConfig& cfg);

struct EpochMetrics {
  std::size_t epoch = 0;
  double wall_seconds = 0.0;  // cumulative training time, evaluation excluded
  double loss = 0.0;          // mean per-sample training loss
  double p_at_1 = 0.0;
  double active_frac = 0.0;   // mean |output active set| / output width
  double touched_frac = 0.0;  // touched weight entries / all weight entries, averaged over samples
  std::size_t samples = 0;
  std::size_t batches = 0;
  std::uint64_t active_total = 0;
  std::size_t reinserted = 0;  // neurons re-bucketed by maintenance this epoch
  std::size_t rebuilds = 0;    // full table rebuilds this epoch
};

struct MaintenanceStats {
  std::size_t rounds = 0;
  std::size_t reinserted = 0;
  std::size_t rebuilds = 0;
};

class Trainer {
 public:
  // Applies the lane and bf16 settings to `net` and locks its bf16 mode.
  // The network must outlive the trainer.
  Trainer(Network& net, const TrainConfig& cfg);

  EpochMetrics train_epoch(const SparseBatchView& data);
  // Same loop over per-example arrays; only for the layout comparison.
  EpochMetrics train_epoch(const FragmentedBatch& data);

  // Re-buckets every neuron whose codes changed since it was last inserted,
  // or rebuilds all tables when `full` is set or a rebuild round is due.
  void maintenance(bool full = false);

  const MaintenanceStats& maintenance_stats() const noexcept { return stats_; }
  const Optimizer& optimizer() const noexcept { return opt_; }
  const TrainConfig& config() const noexcept { return cfg_; }
  const Network& network() const noexcept { return net_; }
  std::size_t epochs_done() const noexcept { return epochs_done_; }
  double elapsed_seconds() const noexcept { return elapsed_; }
  std::span<const std::uint32_t> active_trace() const noexcept { return active_trace_; }

 private:
  template <typename Data>
  EpochMetrics run_epoch(const Data& data);
  void mark_dirty();

  Network& net_;
  TrainConfig cfg_;
  Optimizer opt_;
  std::vector<std::vector<std::uint8_t>> dirty_;
  std::vector<SampleTrace> traces_;
  std::vector<double> losses_;
  std::vector<std::uint32_t> active_counts_;
  std::vector<std::uint64_t> touched_counts_;
  std::vector<std::uint32_t> active_trace_;
  MaintenanceStats stats_;
  std::size_t batches_done_ = 0;
  std::size_t epochs_done_ = 0;
  double elapsed_ = 0.0;
};

// Fraction of examples whose top-scoring output neuron, computed densely in
// fp32 over all outputs, is one of their labels. Throws Error when empty.
double evaluate_p_at_1(const Network& net, const SparseBatchView& data, int threads = 1);

// Runs cfg.epochs epochs; after each, P@1 on `eval` (the training set when
// null) and, when `csv` is set, one metrics row.
std::vector<EpochMetrics> fit(Trainer& trainer, const SparseBatchView& train, const SparseBatchView* eval,
                              std::ostream* csv = nullptr);

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const EpochMetrics& m);

}  // namespace lshtrain
