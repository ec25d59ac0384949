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

#include "lshtrain/trainer.hpp"

#include <algorithm>
#include <exception>
#include <ios>
#include <ostream>

#include <omp.h>

#include "lshtrain/error.hpp"
#include "lshtrain/rng.hpp"

namespace lshtrain {

namespace {
constexpr std::uint64_t kSampleStream = 0x5A3B1E;

class ErrorSlot {
 public:
  void capture() {
#pragma omp critical(lshtrain_trainer_error)
    if (!error_) error_ = std::current_exception();
  }
  void rethrow() const {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::exception_ptr error_;
};
}  // namespace

void TrainConfig::validate() const {
  if (layers.empty()) throw ConfigError("at least one layer is required");
  for (const LayerConfig& l : layers) l.validate();
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (rehash_period == 0) throw ConfigError("rehash_period must be >= 1");
  if (rebuild_every == 0) throw ConfigError("rebuild_every must be >= 1");
  lanes.validate();
  if (!(adam.lr >= 0.0f) || !(adam.beta1 >= 0.0f && adam.beta1 < 1.0f) || !(adam.beta2 >= 0.0f && adam.beta2 < 1.0f) ||
      !(adam.eps > 0.0f)) {
    throw ConfigError("ADAM hyperparameters out of range");
  }
}

Network build_network(const TrainConfig& cfg) {
  cfg.validate();
  return Network(cfg.layers, cfg.seed, cfg.lanes);
}

Trainer::Trainer(Network& net, const TrainConfig& cfg) : net_(net), cfg_(cfg), opt_(net, cfg.adam) {
  cfg_.validate();
  net_.set_lanes(cfg_.lanes);
  net_.set_quant_mode(cfg_.bf16_mode, cfg_.bf16_rounding);
  net_.lock_quant_mode();
  dirty_.resize(net_.num_layers());
  for (std::size_t l = 0; l < net_.num_layers(); ++l) {
    if (net_.layer(l).tables() != nullptr) dirty_[l].assign(net_.layer(l).config().n, 0);
  }
}

void Trainer::mark_dirty() {
  for (std::size_t l = 0; l < dirty_.size(); ++l) {
    if (dirty_[l].empty()) continue;
    const auto touched = opt_.accumulator(l).bias_touched();
    for (std::size_t i = 0; i < touched.size(); ++i) dirty_[l][i] |= touched[i];
  }
}

void Trainer::maintenance(bool full) {
  ++stats_.rounds;
  const bool rebuild = full || stats_.rounds % cfg_.rebuild_every == 0;
  for (std::size_t l = 0; l < net_.num_layers(); ++l) {
    Layer& layer = net_.layer_mut(l);
    LshTables* tables = layer.tables_mut();
    if (tables == nullptr) continue;
    std::vector<std::uint8_t>& dirty = dirty_[l];
    if (rebuild) {
      layer.rebuild_tables(cfg_.threads);
      ++stats_.rebuilds;
      std::fill(dirty.begin(), dirty.end(), 0);
      continue;
    }
    std::vector<std::uint32_t> ids;
    for (std::size_t i = 0; i < dirty.size(); ++i) {
      if (dirty[i]) ids.push_back(static_cast<std::uint32_t>(i));
    }
    const std::size_t nt = tables->num_tables();
    std::vector<std::uint32_t> codes(ids.size() * nt);
    const LayerWeights& w = layer.weights();
    const LshHash& hash = tables->hash();
    const LaneConfig lanes = tables->lanes();
    ErrorSlot err;
    const auto count = static_cast<std::ptrdiff_t>(ids.size());
#pragma omp parallel num_threads(cfg_.threads)
    {
      std::vector<float> scratch;
#pragma omp for schedule(static)
      for (std::ptrdiff_t k = 0; k < count; ++k) {
        try {
          hash.codes(w.neuron(ids[k], scratch), std::span<std::uint32_t>(codes).subspan(k * nt, nt), lanes);
        } catch (...) {
          err.capture();
        }
      }
    }
    err.rethrow();
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const std::span<const std::uint32_t> fresh = std::span<const std::uint32_t>(codes).subspan(k * nt, nt);
      const auto stored = tables->stored_codes(ids[k]);
      if (tables->contains(ids[k]) && std::equal(fresh.begin(), fresh.end(), stored.begin())) continue;
      if (tables->contains(ids[k])) tables->erase(ids[k]);
      tables->insert_codes(ids[k], fresh);
      ++stats_.reinserted;
    }
    std::fill(dirty.begin(), dirty.end(), 0);
  }
}

template <typename Data>
EpochMetrics Trainer::run_epoch(const Data& data) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t n = data.size();
  const std::size_t bs = cfg_.batch_size;
  const std::size_t num_batches = (n + bs - 1) / bs;
  const int threads = cfg_.threads;
  const MaintenanceStats before = stats_;

  std::uint64_t total_weights = 0;
  for (const Layer& layer : net_.layers()) total_weights += static_cast<std::uint64_t>(layer.config().n) * layer.config().m;

  std::vector<QueryScratch> scratches(static_cast<std::size_t>(threads));
  std::vector<SampleTrace> local(static_cast<std::size_t>(threads));
  if (cfg_.record_traces) active_trace_.clear();

  double loss_sum = 0.0;
  std::uint64_t active_total = 0;
  std::uint64_t touched_total = 0;
  for (std::size_t b = 0; b < num_batches; ++b) {
    const std::size_t start = b * bs;
    const std::size_t count = std::min(bs, n - start);
    losses_.assign(count, 0.0);
    active_counts_.assign(count, 0);
    touched_counts_.assign(count, 0);
    if (!cfg_.hogwild && traces_.size() < count) traces_.resize(count);

    ErrorSlot err;
    const auto cnt = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel num_threads(threads)
    {
      const auto tid = static_cast<std::size_t>(omp_get_thread_num());
      QueryScratch& qs = scratches[tid];
#pragma omp for schedule(static)
      for (std::ptrdiff_t s = 0; s < cnt; ++s) {
        try {
          SampleTrace& tr = cfg_.hogwild ? local[tid] : traces_[static_cast<std::size_t>(s)];
          SplitMix64 rng(derive_seed(cfg_.seed ^ kSampleStream, epochs_done_, start + static_cast<std::size_t>(s)));
          losses_[s] = net_.train_sample(data.example(start + static_cast<std::size_t>(s)), rng, tr, qs);
          active_counts_[s] = static_cast<std::uint32_t>(tr.layers.back().active.size());
          std::uint64_t touched = 0;
          for (const LayerTrace& lt : tr.layers) touched += lt.grad.touched();
          touched_counts_[s] = touched;
          if (cfg_.hogwild) opt_.accumulate_racy(tr);
        } catch (...) {
          err.capture();
        }
      }
    }
    err.rethrow();

    for (std::size_t s = 0; s < count; ++s) {
      if (!cfg_.hogwild) opt_.accumulate(traces_[s]);
      loss_sum += losses_[s];
      active_total += active_counts_[s];
      touched_total += touched_counts_[s];
    }
    if (cfg_.record_traces) active_trace_.insert(active_trace_.end(), active_counts_.begin(), active_counts_.end());
    mark_dirty();
    opt_.step(net_, threads);
    ++batches_done_;
    if (batches_done_ % cfg_.rehash_period == 0) maintenance();
  }

  elapsed_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ++epochs_done_;

  EpochMetrics m;
  m.epoch = epochs_done_;
  m.wall_seconds = elapsed_;
  m.samples = n;
  m.batches = num_batches;
  m.active_total = active_total;
  m.reinserted = stats_.reinserted - before.reinserted;
  m.rebuilds = stats_.rebuilds - before.rebuilds;
  if (n > 0) {
    m.loss = loss_sum / static_cast<double>(n);
    m.active_frac = static_cast<double>(active_total) / (static_cast<double>(n) * static_cast<double>(net_.output_dim()));
    m.touched_frac = static_cast<double>(touched_total) / (static_cast<double>(n) * static_cast<double>(total_weights));
  }
  return m;
}

EpochMetrics Trainer::train_epoch(const SparseBatchView& data) {
  if (data.input_dim() != net_.input_dim() || data.label_dim() != net_.output_dim()) {
    throw DimensionError("dataset dimensions do not match the network");
  }
  return run_epoch(data);
}

EpochMetrics Trainer::train_epoch(const FragmentedBatch& data) {
  if (data.input_dim != net_.input_dim() || data.label_dim != net_.output_dim()) {
    throw DimensionError("dataset dimensions do not match the network");
  }
  return run_epoch(data);
}

double evaluate_p_at_1(const Network& net, const SparseBatchView& data, int threads) {
  if (data.size() == 0) throw Error("evaluate_p_at_1: empty dataset");
  if (data.input_dim() != net.input_dim() || data.label_dim() != net.output_dim()) {
    throw DimensionError("dataset dimensions do not match the network");
  }
  const auto n = static_cast<std::ptrdiff_t>(data.size());
  std::uint64_t hits = 0;
  ErrorSlot err;
#pragma omp parallel num_threads(std::max(threads, 1)) reduction(+ : hits)
  {
    SampleTrace trace;
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      try {
        const SparseExampleView ex = data.example(static_cast<std::size_t>(i));
        const std::uint32_t top = net.predict_top1(ex.features(), trace);
        if (std::binary_search(ex.labels.begin(), ex.labels.end(), top)) ++hits;
      } catch (...) {
        err.capture();
      }
    }
  }
  err.rethrow();
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

std::vector<EpochMetrics> fit(Trainer& trainer, const SparseBatchView& train, const SparseBatchView* eval,
                              std::ostream* csv) {
  std::vector<EpochMetrics> out;
  if (csv != nullptr) write_metrics_header(*csv);
  for (std::size_t e = 0; e < trainer.config().epochs; ++e) {
    EpochMetrics m = trainer.train_epoch(train);
    m.p_at_1 = evaluate_p_at_1(trainer.network(), eval != nullptr ? *eval : train, trainer.config().threads);
    if (csv != nullptr) {
      write_metrics_row(*csv, m);
      csv->flush();
    }
    out.push_back(m);
  }
  return out;
}

void write_metrics_header(std::ostream& out) { out << "epoch,wall_seconds,loss,p_at_1,active_frac,touched_frac\n"; }

void write_metrics_row(std::ostream& out, const EpochMetrics& m) {
  const auto flags = out.flags();
  const auto prec = out.precision();
  out.precision(10);
  out << m.epoch << ',' << m.wall_seconds << ',' << m.loss << ',' << m.p_at_1 << ',' << m.active_frac << ','
      << m.touched_frac << '\n';
  out.flags(flags);
  out.precision(prec);
}

}  // namespace lshtrain
