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

// Dictionary reuse: copying dictionaries between models, freezing them, and
// the few-shot protocol (frozen dictionaries, fresh classifier head, body
// coefficients tuned on their existing support only).

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lcnn/training.hpp"

namespace lcnn {

struct TransferPlan {
  std::vector<std::pair<std::size_t, std::size_t>> mapping;  // source layer -> destination layer
  bool freeze_after_transfer = true;
  bool strict = true;  // mismatch: error when true, skip and report when false
};

struct TransferReport {
  std::vector<std::pair<std::size_t, std::size_t>> applied;
  std::vector<std::string> skipped;  // one message per skipped pair
};

// Destination layers of the plan receive bitwise copies of the source
// dictionaries (frozen when requested). Everything else is left untouched.
LcnnModel<float> transfer_dictionaries(const LcnnModel<float>& src, const LcnnModel<float>& dst,
                                       const TransferPlan& plan,
                                       TransferReport* report = nullptr);

// Maps each destination lookup layer to the source layer of the same name or,
// failing that, the first source layer with the same block tag and the same
// dictionary shape (k, m). Unmatched destination layers are left out.
TransferPlan auto_transfer_plan(const LcnnModel<float>& src, const LcnnModel<float>& dst);

// "src_name->dst_name,..." resolved against the two models.
TransferPlan parse_transfer_plan(const std::string& text, const LcnnModel<float>& src,
                                 const LcnnModel<float>& dst);

void freeze_dictionaries(LcnnModel<float>& model);

// Index of the classifier (last layer, which must be a lookup FC layer).
std::size_t head_layer(const LcnnModel<float>& model);

// Keeps the head dictionary (frozen) and re-draws its P and bias for
// `new_classes` outputs with the initialization distribution. In fixed-s mode
// the entries removed by the initial projection are pinned at zero so the
// trainable set of the head is its initial support in both sparsity modes.
LcnnModel<float> replace_head(const LcnnModel<float>& model, std::size_t new_classes, Rng& rng);

struct FewShotEpisode {
  std::size_t novel_class_count = 0;
  std::size_t shots_per_class = 0;
  std::vector<Sample<float>> support;
  std::vector<Sample<float>> query;
  std::uint64_t resample_seed = 0;
};

// Draws `shots` support samples per class and up to `queries_per_class` query
// samples per class (disjoint from the support) from a pool labelled
// 0..classes-1.
FewShotEpisode sample_episode(const std::vector<Sample<float>>& pool, std::size_t classes,
                              std::size_t shots, std::size_t queries_per_class,
                              std::uint64_t seed);

// Head: P (on its unpinned entries) and bias at the full rate, with sparsity
// enforcement. Other lookup layers: nonzero P entries only, at
// body_lr_ratio times the rate, no enforcement. Biases outside the head and
// dense layers stay fixed.
UpdatePolicy few_shot_policy(const LcnnModel<float>& model, double body_lr_ratio);

// Scalars a training step under `policy` is allowed to change.
std::size_t trainable_scalar_count(const LcnnModel<float>& model, const UpdatePolicy& policy);

struct FewShotMetrics {
  double query_accuracy = 0.0;
  double support_accuracy = 0.0;
  std::size_t trainable_scalars = 0;
  std::size_t head_trainable = 0;  // head P nonzeros + head biases
  std::size_t dense_head_params = 0;  // n * m + n for a dense classifier
};

// Requires every dictionary to be frozen (contract error otherwise).
FewShotMetrics few_shot_finetune(LcnnModel<float>& model, const FewShotEpisode& episode,
                                 const TrainConfig& cfg, double body_lr_ratio = 1.0);

}  // namespace lcnn
