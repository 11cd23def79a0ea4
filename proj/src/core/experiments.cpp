// Copyright 2026 The LCNN Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lcnn/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "lcnn/config.hpp"
#include "lcnn/dataset.hpp"
#include "lcnn/perf.hpp"
#include "lcnn/serialize.hpp"
#include "lcnn/transfer.hpp"

namespace lcnn {

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kNumeric: return 4;
    case ErrorKind::kData:
    case ErrorKind::kDimension:
    case ErrorKind::kBounds:
    case ErrorKind::kFormat:
    case ErrorKind::kIo: return 3;
    default: return 2;
  }
}

namespace {

// Test samples come from a different per-sample stream than training ones.
constexpr std::uint64_t kTestStream = 0x7e57;
constexpr std::uint64_t kNovelStream = 0x0fe5;

ExperimentConfig config_for(const CommandOptions& o, bool required) {
  ExperimentConfig cfg;
  if (!o.config.empty()) {
    cfg = load_config(o.config);
  } else {
    require(!required, ErrorKind::kConfig, "--config is required for this command");
  }
  if (o.seed) cfg.train.seed = *o.seed;
  if (!o.model.empty()) cfg.model = o.model;
  if (!o.out.empty()) cfg.out = o.out;
  return cfg;
}

// Geometry problems in the configured architecture are configuration errors.
ArchSpec checked_arch(const ExperimentConfig& cfg) {
  try {
    ArchSpec a = cfg.arch_spec();
    resolve(a);
    return a;
  } catch (const Error& e) {
    fail(ErrorKind::kConfig, std::string("architecture: ") + e.what());
  }
}

Dataset train_set(const ExperimentConfig& cfg) {
  if (!cfg.train_dir.empty()) return load_raw_dir(cfg.train_dir);
  return make_synthetic(cfg.synthetic);
}

std::optional<Dataset> test_set(const ExperimentConfig& cfg) {
  if (!cfg.test_dir.empty()) return load_raw_dir(cfg.test_dir);
  if (!cfg.train_dir.empty() || cfg.synthetic_test_per_class == 0) return std::nullopt;
  SyntheticSpec spec = cfg.synthetic;
  spec.per_class = cfg.synthetic_test_per_class;
  spec.sample_seed ^= kTestStream;
  return make_synthetic(spec);
}

void check_data(const Dataset& d, const LcnnModel<float>& model) {
  require(d.shape == model.input, ErrorKind::kData,
          "dataset dims " + to_string(d.shape) + " do not match model input " +
              to_string(model.input));
  require(d.num_classes <= model.num_classes, ErrorKind::kData,
          "dataset has " + std::to_string(d.num_classes) + " classes, model has " +
              std::to_string(model.num_classes));
}

std::string metrics_line(const IterationLog& log) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "iter=%zu loss=%.6f l1=%.6f mean_l0=%.4f acc=%.4f",
                log.iteration, log.step.loss, log.step.l1, log.mean_l0, log.step.accuracy);
  return buf;
}

std::string need_path(const std::string& path, const char* what) {
  require(!path.empty(), ErrorKind::kConfig, std::string("no ") + what + " path given");
  return path;
}

// Trains `model` on `data`, streaming metrics to `log` and checkpointing.
void run_training(LcnnModel<float>& model, const Dataset& data, const ExperimentConfig& cfg,
                  std::ostream& log) {
  train(model, data.samples, cfg.train, nullptr, [&](const IterationLog& it) {
    log << metrics_line(it) << '\n';
    if (cfg.checkpoint_every > 0 && !cfg.out.empty() && (it.iteration + 1) % cfg.checkpoint_every == 0)
      save_model(model, cfg.out + ".ckpt-" + std::to_string(it.iteration + 1));
  });
}

void print_eval(std::ostream& out, const char* label, const EvalResult& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s samples=%zu top1=%.4f top5=%.4f\n", label, r.samples,
                r.top1_accuracy(), r.top5_accuracy());
  out << buf;
}

int cmd_train(const CommandOptions& o, std::ostream& out) {
  const ExperimentConfig cfg = config_for(o, true);
  const std::string path = need_path(cfg.out, "output model");
  LcnnModel<float> model = init_model(checked_arch(cfg), cfg.train);
  const Dataset data = train_set(cfg);
  check_data(data, model);
  std::ofstream file;
  if (!cfg.metrics_log.empty()) {
    file.open(cfg.metrics_log, std::ios::trunc);
    require(file.good(), ErrorKind::kIo, "cannot write metrics log '" + cfg.metrics_log + "'");
  }
  run_training(model, data, cfg, file.is_open() ? static_cast<std::ostream&>(file) : out);
  save_model(model, path);
  print_eval(out, "train", evaluate(model, data.samples));
  if (auto test = test_set(cfg)) {
    check_data(*test, model);
    print_eval(out, "test", evaluate(model, test->samples));
  }
  out << "saved " << path << '\n';
  return 0;
}

int cmd_eval(const CommandOptions& o, std::ostream& out) {
  const ExperimentConfig cfg = config_for(o, true);
  const LcnnModel<float> model = load_model(need_path(cfg.model, "model"));
  auto data = test_set(cfg);
  require(data.has_value(), ErrorKind::kConfig, "no evaluation data configured");
  check_data(*data, model);
  const EvalResult r = evaluate(model, data->samples);
  print_eval(out, "eval", r);
  for (std::size_t c = 0; c < r.per_class_total.size(); ++c)
    out << "class " << c << ' ' << r.per_class_correct[c] << '/' << r.per_class_total[c] << '\n';
  return 0;
}

int cmd_convert(const CommandOptions& o, std::ostream& out) {
  const ExperimentConfig cfg = config_for(o, false);
  const std::string in = need_path(cfg.model, "input model");
  const std::string dst = need_path(cfg.out, "output model");
  LcnnModel<float> model = load_model(in);
  require(!model.lcnn_layer_ids().empty() && model.training_mode(), ErrorKind::kMode,
          "'" + in + "' is not a training-form model; nothing to convert");
  convert_to_inference(model);
  const auto bytes = serialize_model(model);
  write_file(dst, bytes);
  out << "converted " << in << " -> " << dst << " (" << read_file(in).size() << " -> "
      << bytes.size() << " bytes)\n";
  return 0;
}

int cmd_fewshot(const CommandOptions& o, std::ostream& out) {
  const ExperimentConfig cfg = config_for(o, true);
  LcnnModel<float> base;
  if (!cfg.model.empty()) {
    base = load_model(cfg.model);
  } else {
    base = init_model(checked_arch(cfg), cfg.train);
    const Dataset data = train_set(cfg);
    check_data(data, base);
    std::ostringstream sink;
    run_training(base, data, cfg, sink);
  }
  head_layer(base);
  require(base.training_mode(), ErrorKind::kMode, "few-shot needs a training-form base model");
  require(!cfg.fewshot_shots.empty() && cfg.fewshot_trials >= 1, ErrorKind::kConfig,
          "fewshot_shots and fewshot_trials must be non-empty");

  std::size_t max_shots = 0;
  for (const auto s : cfg.fewshot_shots) max_shots = std::max(max_shots, s);
  Dataset pool;
  if (!cfg.test_dir.empty()) {
    pool = load_raw_dir(cfg.test_dir);
  } else {
    SyntheticSpec spec = cfg.synthetic;
    spec.classes = cfg.fewshot_novel_classes;
    spec.first_class = cfg.fewshot_novel_first;
    spec.per_class = max_shots + cfg.fewshot_queries;
    spec.sample_seed ^= kNovelStream;
    pool = make_synthetic(spec);
  }
  require(pool.shape == base.input, ErrorKind::kData, "novel-class data dims do not match model");

  std::ofstream file;
  if (!cfg.out.empty()) {
    file.open(cfg.out, std::ios::trunc);
    require(file.good(), ErrorKind::kIo, "cannot write report '" + cfg.out + "'");
  }
  std::ostream& rep = file.is_open() ? static_cast<std::ostream&>(file) : out;
  char buf[256];
  for (const std::size_t shots : cfg.fewshot_shots) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t trial = 0; trial < cfg.fewshot_trials; ++trial) {
      const std::uint64_t seed = cfg.train.seed * 1000003ULL + shots * 1009ULL + trial;
      LcnnModel<float> m = base;
      freeze_dictionaries(m);
      Rng rng(seed);
      m = replace_head(m, pool.num_classes, rng);
      const FewShotEpisode ep =
          sample_episode(pool.samples, pool.num_classes, shots, cfg.fewshot_queries, seed);
      TrainConfig ft = cfg.train;
      ft.iterations = cfg.fewshot_iterations;
      ft.batch_size = std::min(ft.batch_size, ep.support.size());
      ft.seed = seed;
      const FewShotMetrics fm = few_shot_finetune(m, ep, ft, cfg.fewshot_body_lr_ratio);
      sum += fm.query_accuracy;
      sq += fm.query_accuracy * fm.query_accuracy;
      std::snprintf(buf, sizeof buf,
                    "shots=%zu trial=%zu query_acc=%.4f trainable=%zu head_trainable=%zu "
                    "dense_head=%zu\n",
                    shots, trial, fm.query_accuracy, fm.trainable_scalars, fm.head_trainable,
                    fm.dense_head_params);
      rep << buf;
    }
    const double n = double(cfg.fewshot_trials);
    const double mean = sum / n;
    const double sd = std::sqrt(std::max(0.0, sq / n - mean * mean));
    std::snprintf(buf, sizeof buf, "summary shots=%zu mean_acc=%.4f std_acc=%.4f chance=%.4f\n",
                  shots, mean, sd, 1.0 / double(pool.num_classes));
    rep << buf;
  }
  return 0;
}

int cmd_transfer(const CommandOptions& o, std::ostream& out) {
  const ExperimentConfig cfg = config_for(o, true);
  const std::string path = need_path(cfg.out, "output model");
  const LcnnModel<float> src = load_model(need_path(cfg.source_model, "source model"));
  LcnnModel<float> dst =
      cfg.model.empty() ? init_model(checked_arch(cfg), cfg.train) : load_model(cfg.model);
  TransferPlan plan = cfg.transfer_plan == "auto" ? auto_transfer_plan(src, dst)
                                                  : parse_transfer_plan(cfg.transfer_plan, src, dst);
  plan.strict = cfg.transfer_strict;
  plan.freeze_after_transfer = cfg.transfer_freeze;
  TransferReport report;
  dst = transfer_dictionaries(src, dst, plan, &report);
  for (const auto& [s, d] : report.applied)
    out << "mapped " << src.layers[s].name << " -> " << dst.layers[d].name << '\n';
  for (const auto& msg : report.skipped) out << "skipped " << msg << '\n';
  if (cfg.train.iterations > 0) {
    const Dataset data = train_set(cfg);
    check_data(data, dst);
    std::ofstream file;
    if (!cfg.metrics_log.empty()) file.open(cfg.metrics_log, std::ios::trunc);
    run_training(dst, data, cfg, file.is_open() ? static_cast<std::ostream&>(file) : out);
  }
  save_model(dst, path);
  out << "saved " << path << '\n';
  return 0;
}

int cmd_bench(const CommandOptions& o, std::ostream& out) {
  const ExperimentConfig cfg = config_for(o, false);
  SpeedupReport report;
  if (!cfg.model.empty()) {
    report = speedup_report(load_model(cfg.model));
  } else {
    require(!o.config.empty(), ErrorKind::kConfig, "bench needs --model or --config");
    require(cfg.bench_mean_s.has_value(), ErrorKind::kConfig,
            "config key 'bench_mean_s' is required to cost an architecture template");
    report = speedup_report(checked_arch(cfg), cfg.train.dict_policy, *cfg.bench_mean_s);
  }
  out << render_table(report);
  if (!o.csv.empty()) {
    const std::string csv = render_csv(report);
    write_file(o.csv, std::span(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));
  }
  return 0;
}

}  // namespace

int run_command(const std::string& command, const CommandOptions& options, std::ostream& out,
                std::ostream& err) {
  using Fn = int (*)(const CommandOptions&, std::ostream&);
  static const std::map<std::string, Fn> commands = {
      {"train", cmd_train},       {"eval", cmd_eval},         {"convert", cmd_convert},
      {"fewshot", cmd_fewshot},   {"transfer", cmd_transfer}, {"bench", cmd_bench}};
  const auto it = commands.find(command);
  if (it == commands.end()) {
    err << "error: unknown command '" << command << "'\n";
    return 2;
  }
  try {
    return it->second(options, out);
  } catch (const NumericFailure& e) {
    err << "error: numeric failure";
    if (e.layer() != NumericFailure::npos) err << " at layer " << e.layer();
    err << ": " << e.what() << '\n';
    return 4;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace lcnn
