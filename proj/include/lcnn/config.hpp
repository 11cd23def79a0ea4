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

#pragma once

// Experiment configuration: UTF-8 text, one "key = value" per line, '#'
// starts a comment. Unknown keys are rejected.
//
// Model:     arch (template name) or layers (explicit list), input (CxWxH),
//            num_classes
// Training:  mode, s_max, c, lambda_prime, learning_rate, momentum,
//            dict_weight_decay, batch_size, iterations, seed, route
// Dict size: dict_policy (tiered|fraction|explicit), dict_fraction,
//            dict_sizes, dict_first, dict_base, dict_fc
// Data:      train_dir, test_dir, or synthetic_* keys
// Outputs:   model, out, metrics_log, checkpoint_every
// Transfer:  source_model, transfer_plan (auto | a->b,...), transfer_strict,
//            transfer_freeze
// Few-shot:  fewshot_shots, fewshot_trials, fewshot_queries,
//            fewshot_novel_classes, fewshot_novel_first, fewshot_body_lr_ratio,
//            fewshot_iterations
// Bench:     bench_mean_s

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lcnn/dataset.hpp"
#include "lcnn/training.hpp"

namespace lcnn {

struct ExperimentConfig {
  std::string arch = "toy-cnn";
  std::string layers;  // explicit layer list; overrides arch when set
  Shape3 input{3, 32, 32};
  std::size_t num_classes = 10;

  TrainConfig train{};

  std::string train_dir;
  std::string test_dir;
  SyntheticSpec synthetic{};
  std::size_t synthetic_test_per_class = 20;

  std::string model;  // input model path
  std::string out;    // output path
  std::string metrics_log;
  std::size_t checkpoint_every = 0;

  std::string source_model;
  std::string transfer_plan = "auto";
  bool transfer_strict = true;
  bool transfer_freeze = true;

  std::vector<std::size_t> fewshot_shots{1, 2, 4};
  std::size_t fewshot_trials = 20;
  std::size_t fewshot_queries = 10;
  std::size_t fewshot_novel_classes = 10;
  std::size_t fewshot_novel_first = 10;
  double fewshot_body_lr_ratio = 0.1;
  std::size_t fewshot_iterations = 50;

  std::optional<double> bench_mean_s;

  std::set<std::string> present;  // keys given in the file
  bool has(const std::string& key) const { return present.count(key) > 0; }

  ArchSpec arch_spec() const;
};

// Errors are config errors naming the key or line.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

Shape3 parse_shape(const std::string& text);

}  // namespace lcnn
