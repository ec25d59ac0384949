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

#include "lshtrain/cli/commands.hpp"

#include <chrono>
#include <fstream>
#include <memory>
#include <ostream>

#include "lshtrain/checkpoint.hpp"
#include "lshtrain/synthetic.hpp"
#include "lshtrain/trainer.hpp"

namespace lshtrain::cli {

namespace {

void require_file(const std::string& path, const char* what) {
  if (!std::filesystem::is_regular_file(path)) {
    throw MissingFileError(std::string(what) + " '" + path + "' does not exist");
  }
}

SparseBatch load_split(const RunConfig& cfg, const std::string& path) {
  require_file(path, "dataset");
  SparseBatch b = load_libsvm_multilabel(path, std::nullopt, {cfg.one_based_features, cfg.one_based_labels});
  if ((cfg.input_dim != 0 && cfg.input_dim != b.input_dim()) ||
      (cfg.label_dim != 0 && cfg.label_dim != b.label_dim())) {
    throw ConfigError("dataset '" + path + "' has dimensions " + std::to_string(b.input_dim()) + " x " +
                      std::to_string(b.label_dim()) + ", config says " + std::to_string(cfg.input_dim) + " x " +
                      std::to_string(cfg.label_dim));
  }
  return b;
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    body();
    return 0;
  } catch (const MissingFileError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

struct Variant {
  std::string name;
  RunConfig cfg;
  bool fragmented = false;
};

std::vector<Variant> variants(const RunConfig& base, Ablation a) {
  std::vector<Variant> v;
  switch (a) {
    case Ablation::Avx:
      v.push_back({"lanes_off", base});
      v.back().cfg.lanes = false;
      v.push_back({"lanes_on", base});
      v.back().cfg.lanes = true;
      break;
    case Ablation::Bf16:
      for (const char* mode : {"none", "activations", "both"}) {
        v.push_back({mode, base});
        v.back().cfg.bf16_mode = mode;
      }
      break;
    case Ablation::Layout:
      v.push_back({"fragmented", base, true});
      v.push_back({"coalesced", base, false});
      break;
  }
  return v;
}

}  // namespace

RunConfig load_run_config(const std::filesystem::path& config_path, const Overrides& o) {
  nlohmann::json j = nlohmann::json::object();
  if (!config_path.empty()) {
    if (!std::filesystem::is_regular_file(config_path)) {
      throw MissingFileError("config file '" + config_path.string() + "' does not exist");
    }
    std::ifstream in(config_path);
    j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file '" + config_path.string() + "' is not valid JSON");
    if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  }
  for (const std::string& s : o.set) {
    auto [key, value] = parse_assignment(s);
    j[key] = value;
  }
  if (o.threads) j["threads"] = *o.threads;
  if (o.seed) j["seed"] = *o.seed;
  if (o.no_lanes) j["lanes"] = false;
  if (o.bf16) j["bf16_mode"] = *o.bf16;
  if (o.metrics) j["metrics_path"] = *o.metrics;
  if (o.checkpoint) j["checkpoint_path"] = *o.checkpoint;
  return config_from_json(j);
}

Datasets load_datasets(const RunConfig& cfg) {
  if (cfg.train_path.empty()) {
    SyntheticSpec spec = synthetic_spec(cfg);
    Datasets d{generate_synthetic(spec, 0), SparseBatch::empty(cfg.input_dim, cfg.label_dim)};
    if (cfg.synthetic_test > 0) {
      spec.num_examples = cfg.synthetic_test;
      d.test = generate_synthetic(spec, 1);
    } else {
      d.test = d.train;
    }
    return d;
  }
  Datasets d{load_split(cfg, cfg.train_path), SparseBatch::empty(1, 1)};
  if (cfg.test_path.empty()) {
    d.test = d.train;
  } else {
    d.test = load_split(cfg, cfg.test_path);
    if (d.test.input_dim() != d.train.input_dim() || d.test.label_dim() != d.train.label_dim()) {
      throw ConfigError("train and test files have different dimensions");
    }
  }
  return d;
}

Ablation parse_ablation(std::string_view s) {
  if (s == "avx") return Ablation::Avx;
  if (s == "bf16") return Ablation::Bf16;
  if (s == "layout") return Ablation::Layout;
  throw ConfigError("ablation must be one of avx|bf16|layout, got '" + std::string(s) + "'");
}

std::string_view to_string(Ablation a) noexcept {
  switch (a) {
    case Ablation::Avx: return "avx";
    case Ablation::Bf16: return "bf16";
    case Ablation::Layout: return "layout";
  }
  return "?";
}

std::vector<BenchRow> run_ablation(const RunConfig& cfg, const Datasets& data, Ablation ablation, std::ostream* log) {
  const std::vector<Variant> vs = variants(cfg, ablation);
  const SparseBatchView train = data.train.view();
  const FragmentedBatch fragments = ablation == Ablation::Layout ? fragmented_copy(train) : FragmentedBatch{};

  std::vector<std::unique_ptr<Network>> nets;
  std::vector<std::unique_ptr<Trainer>> trainers;
  for (const Variant& v : vs) {
    const TrainConfig tc = to_train_config(v.cfg, train.input_dim(), train.label_dim());
    nets.push_back(std::make_unique<Network>(build_network(tc)));
    trainers.push_back(std::make_unique<Trainer>(*nets.back(), tc));
  }

  std::vector<BenchRow> rows(vs.size());
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    for (std::size_t k = 0; k < vs.size(); ++k) {
      const EpochMetrics m = vs[k].fragmented ? trainers[k]->train_epoch(fragments) : trainers[k]->train_epoch(train);
      rows[k].final_loss = m.loss;
      if (log != nullptr) {
        *log << to_string(ablation) << ' ' << vs[k].name << " epoch " << m.epoch << " loss " << m.loss
             << " seconds " << m.wall_seconds << '\n';
      }
    }
  }
  for (std::size_t k = 0; k < vs.size(); ++k) {
    BenchRow& r = rows[k];
    r.ablation = std::string(to_string(ablation));
    r.variant = vs[k].name;
    r.epochs = cfg.epochs;
    r.mean_epoch_seconds = cfg.epochs > 0 ? trainers[k]->elapsed_seconds() / static_cast<double>(cfg.epochs) : 0.0;
    r.p_at_1 = evaluate_p_at_1(*nets[k], data.test.view(), trainers[k]->config().threads);
  }
  for (BenchRow& r : rows) {
    r.ratio_to_first = rows.front().mean_epoch_seconds > 0.0 ? r.mean_epoch_seconds / rows.front().mean_epoch_seconds : 0.0;
  }
  return rows;
}

void write_bench_header(std::ostream& out) {
  out << "ablation,variant,epochs,mean_epoch_seconds,final_loss,p_at_1,ratio_to_first\n";
}

void write_bench_rows(std::ostream& out, const std::vector<BenchRow>& rows) {
  const auto flags = out.flags();
  const auto prec = out.precision();
  out.precision(10);
  for (const BenchRow& r : rows) {
    out << r.ablation << ',' << r.variant << ',' << r.epochs << ',' << r.mean_epoch_seconds << ',' << r.final_loss
        << ',' << r.p_at_1 << ',' << r.ratio_to_first << '\n';
  }
  out.flags(flags);
  out.precision(prec);
}

int run_train(const std::filesystem::path& config_path, const Overrides& overrides, std::ostream& out,
              std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load_run_config(config_path, overrides);
    const Datasets data = load_datasets(cfg);
    const TrainConfig tc = to_train_config(cfg, data.train.input_dim(), data.train.label_dim());
    Network net = build_network(tc);
    Trainer trainer(net, tc);

    std::ofstream csv;
    if (!cfg.metrics_path.empty()) {
      csv.open(cfg.metrics_path);
      if (!csv) throw Error("cannot write metrics file '" + cfg.metrics_path + "'");
    }
    const SparseBatchView test = data.test.view();
    const std::vector<EpochMetrics> ms = fit(trainer, data.train.view(), &test, csv.is_open() ? &csv : nullptr);
    for (const EpochMetrics& m : ms) {
      out << "epoch " << m.epoch << " loss " << m.loss << " p@1 " << m.p_at_1 << " active " << m.active_frac
          << " seconds " << m.wall_seconds << '\n';
    }
    if (!cfg.checkpoint_path.empty()) save_checkpoint(net, std::filesystem::path(cfg.checkpoint_path));
  });
}

int run_eval(const std::filesystem::path& config_path, const Overrides& overrides, std::ostream& out,
             std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load_run_config(config_path, overrides);
    if (cfg.checkpoint_path.empty()) throw ConfigError("eval needs checkpoint_path");
    require_file(cfg.checkpoint_path, "checkpoint");
    const Datasets data = load_datasets(cfg);
    const TrainConfig tc = to_train_config(cfg, data.train.input_dim(), data.train.label_dim());
    Network net = build_network(tc);
    load_checkpoint(net, std::filesystem::path(cfg.checkpoint_path));
    out << "p_at_1 " << evaluate_p_at_1(net, data.test.view(), tc.threads) << '\n';
  });
}

int run_bench(const std::filesystem::path& config_path, std::string_view ablation, const Overrides& overrides,
              const std::filesystem::path& csv_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Ablation a = parse_ablation(ablation);
    const RunConfig cfg = load_run_config(config_path, overrides);
    const Datasets data = load_datasets(cfg);
    const std::vector<BenchRow> rows = run_ablation(cfg, data, a, &err);
    if (csv_path.empty()) {
      write_bench_header(out);
      write_bench_rows(out, rows);
    } else {
      std::ofstream f(csv_path);
      if (!f) throw Error("cannot write '" + csv_path.string() + "'");
      write_bench_header(f);
      write_bench_rows(f, rows);
    }
  });
}

}  // namespace lshtrain::cli
