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

#include "lcnn/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace lcnn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& expected) {
  fail(ErrorKind::kConfig,
       "config key '" + key + "': cannot parse '" + value + "' as " + expected);
}

std::size_t to_count(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  unsigned long long x = 0;
  try {
    x = std::stoull(v, &used);
  } catch (const std::exception&) {
    bad_value(key, v, "a non-negative integer");
  }
  if (used != v.size() || v.front() == '-') bad_value(key, v, "a non-negative integer");
  return static_cast<std::size_t>(x);
}

double to_real(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    bad_value(key, v, "a number");
  }
  if (used != v.size()) bad_value(key, v, "a number");
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "a boolean");
}

std::vector<std::size_t> to_counts(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_count(key, trim(item)));
  if (out.empty()) bad_value(key, v, "a comma separated list of integers");
  return out;
}

}  // namespace

Shape3 parse_shape(const std::string& text) {
  std::vector<std::size_t> dims;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, 'x')) dims.push_back(to_count("input", trim(item)));
  require(dims.size() == 3 && dims[0] * dims[1] * dims[2] > 0, ErrorKind::kConfig,
          "input shape '" + text + "' must look like CxWxH");
  return {dims[0], dims[1], dims[2]};
}

ArchSpec ExperimentConfig::arch_spec() const {
  if (!layers.empty()) return parse_layer_list(layers, input, num_classes);
  return arch_by_name(arch, input, num_classes);
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  using Setter = std::function<void(const std::string& key, const std::string& value)>;
  TrainConfig& t = cfg.train;
  SyntheticSpec& syn = cfg.synthetic;
  const std::map<std::string, Setter> setters = {
      {"arch", [&](auto&, auto& v) { cfg.arch = v; }},
      {"layers", [&](auto&, auto& v) { cfg.layers = v; }},
      {"input", [&](auto&, auto& v) { cfg.input = parse_shape(v); }},
      {"num_classes", [&](auto& k, auto& v) { cfg.num_classes = to_count(k, v); }},
      {"mode", [&](auto&, auto& v) { t.mode = sparsity_mode_from_string(v); }},
      {"s_max", [&](auto& k, auto& v) { t.s_max = to_count(k, v); }},
      {"c", [&](auto& k, auto& v) { t.c = to_real(k, v); }},
      {"lambda_prime", [&](auto& k, auto& v) { t.lambda_prime = to_real(k, v); }},
      {"learning_rate", [&](auto& k, auto& v) { t.learning_rate = to_real(k, v); }},
      {"momentum", [&](auto& k, auto& v) { t.momentum = to_real(k, v); }},
      {"dict_weight_decay", [&](auto& k, auto& v) { t.dict_weight_decay = to_real(k, v); }},
      {"batch_size", [&](auto& k, auto& v) { t.batch_size = to_count(k, v); }},
      {"iterations", [&](auto& k, auto& v) { t.iterations = to_count(k, v); }},
      {"seed", [&](auto& k, auto& v) { t.seed = to_count(k, v); }},
      {"route", [&](auto&, auto& v) { t.route = route_from_string(v); }},
      {"dict_policy",
       [&](auto& k, auto& v) {
         if (v == "tiered") t.dict_policy.kind = DictPolicy::Kind::kTiered;
         else if (v == "fraction") t.dict_policy.kind = DictPolicy::Kind::kFraction;
         else if (v == "explicit") t.dict_policy.kind = DictPolicy::Kind::kExplicit;
         else bad_value(k, v, "tiered, fraction or explicit");
       }},
      {"dict_fraction", [&](auto& k, auto& v) { t.dict_policy.fraction = to_real(k, v); }},
      {"dict_sizes", [&](auto& k, auto& v) { t.dict_policy.sizes = to_counts(k, v); }},
      {"dict_first", [&](auto& k, auto& v) { t.dict_policy.first = to_count(k, v); }},
      {"dict_base", [&](auto& k, auto& v) { t.dict_policy.base = to_count(k, v); }},
      {"dict_fc", [&](auto& k, auto& v) { t.dict_policy.fc = to_count(k, v); }},
      {"train_dir", [&](auto&, auto& v) { cfg.train_dir = v; }},
      {"test_dir", [&](auto&, auto& v) { cfg.test_dir = v; }},
      {"synthetic_classes", [&](auto& k, auto& v) { syn.classes = to_count(k, v); }},
      {"synthetic_first_class", [&](auto& k, auto& v) { syn.first_class = to_count(k, v); }},
      {"synthetic_train_per_class", [&](auto& k, auto& v) { syn.per_class = to_count(k, v); }},
      {"synthetic_test_per_class",
       [&](auto& k, auto& v) { cfg.synthetic_test_per_class = to_count(k, v); }},
      {"synthetic_seed", [&](auto& k, auto& v) { syn.seed = to_count(k, v); }},
      {"synthetic_noise", [&](auto& k, auto& v) { syn.noise = to_real(k, v); }},
      {"synthetic_separation", [&](auto& k, auto& v) { syn.separation = to_real(k, v); }},
      {"synthetic_max_shift", [&](auto& k, auto& v) { syn.max_shift = to_count(k, v); }},
      {"model", [&](auto&, auto& v) { cfg.model = v; }},
      {"out", [&](auto&, auto& v) { cfg.out = v; }},
      {"metrics_log", [&](auto&, auto& v) { cfg.metrics_log = v; }},
      {"checkpoint_every", [&](auto& k, auto& v) { cfg.checkpoint_every = to_count(k, v); }},
      {"source_model", [&](auto&, auto& v) { cfg.source_model = v; }},
      {"transfer_plan", [&](auto&, auto& v) { cfg.transfer_plan = v; }},
      {"transfer_strict", [&](auto& k, auto& v) { cfg.transfer_strict = to_bool(k, v); }},
      {"transfer_freeze", [&](auto& k, auto& v) { cfg.transfer_freeze = to_bool(k, v); }},
      {"fewshot_shots", [&](auto& k, auto& v) { cfg.fewshot_shots = to_counts(k, v); }},
      {"fewshot_trials", [&](auto& k, auto& v) { cfg.fewshot_trials = to_count(k, v); }},
      {"fewshot_queries", [&](auto& k, auto& v) { cfg.fewshot_queries = to_count(k, v); }},
      {"fewshot_novel_classes",
       [&](auto& k, auto& v) { cfg.fewshot_novel_classes = to_count(k, v); }},
      {"fewshot_novel_first", [&](auto& k, auto& v) { cfg.fewshot_novel_first = to_count(k, v); }},
      {"fewshot_body_lr_ratio",
       [&](auto& k, auto& v) { cfg.fewshot_body_lr_ratio = to_real(k, v); }},
      {"fewshot_iterations", [&](auto& k, auto& v) { cfg.fewshot_iterations = to_count(k, v); }},
      {"bench_mean_s", [&](auto& k, auto& v) { cfg.bench_mean_s = to_real(k, v); }},
  };

  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorKind::kConfig,
            "config line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    require(it != setters.end(), ErrorKind::kConfig,
            "unknown config key '" + key + "' (line " + std::to_string(lineno) + ")");
    require(cfg.present.insert(key).second, ErrorKind::kConfig,
            "config key '" + key + "' given twice");
    require(!value.empty(), ErrorKind::kConfig, "config key '" + key + "' has no value");
    try {
      it->second(key, value);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kConfig) throw;
      fail(ErrorKind::kConfig, "config key '" + key + "': " + e.what());
    }
  }
  if (!cfg.has("synthetic_classes")) syn.classes = cfg.num_classes;
  syn.shape = cfg.input;
  try {
    t.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kConfig, e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::kConfig, "cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace lcnn
