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

// Joint training of dictionaries and sparse combination tensors.
//
// The objective is softmax cross-entropy averaged over the batch plus, per
// lookup layer, lambda * sum |P|. After every momentum-SGD update the
// sparsity constraint is enforced: top-s per column in fixed-s mode, or the
// threshold function (|x| > epsilon survives, zeroed entries stay zero for
// good) in threshold mode.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lcnn/executor.hpp"
#include "lcnn/model.hpp"

namespace lcnn {

template <class T>
struct Sample {
  Tensor3<T> x;
  std::size_t label = 0;
};

struct TrainConfig {
  SparsityMode mode = SparsityMode::kThreshold;
  std::size_t s_max = 1;        // fixed-s mode
  double c = 0.01;              // epsilon = c * sigma
  double lambda_prime = 0.1;    // lambda = lambda' * epsilon
  double learning_rate = 0.01;
  double momentum = 0.9;
  double dict_weight_decay = 0.0;  // optional l2 on D
  std::size_t batch_size = 32;
  std::size_t iterations = 100;
  std::uint64_t seed = 1;
  Route route = Route::kAuto;
  DictPolicy dict_policy{};

  // Throws a config error naming the offending field.
  void validate() const;
};

using Rng = std::mt19937_64;

// sigma = sqrt(2 / (fan_in + fan_out)), fan_in = m*kh*kw, fan_out = n*kh*kw.
LayerHyper layer_hyper(const ConvGeom& geom, const TrainConfig& cfg);

// D is a 1x1 convolution from m to k channels and gets its own Glorot scale.
double dictionary_sigma(std::size_t m, std::size_t k);

// D drawn from N(0, dictionary_sigma(m, k)), P from N(0, sigma), bias 0.
// Threshold mode runs apply_threshold once; fixed-s mode runs project_top_s
// once and records s_max.
LcnnConvLayer<float> init_layer(const ConvGeom& geom, std::size_t k, const TrainConfig& cfg,
                                Rng& rng);
DenseConvLayer<float> init_dense_layer(const ConvGeom& geom, Rng& rng);

// Builds a training-mode model from an architecture; dictionary sizes come
// from cfg.dict_policy. Seeded from cfg.seed.
LcnnModel<float> init_model(const ArchSpec& arch, const TrainConfig& cfg);

// Sum of |P| over every entry of every filter.
template <class T>
double l1_of_P(const SparseCombiner<T>& combiner);

// Keeps the s largest-magnitude entries of each column P_i[:, r, c]; ties go
// to the lower dictionary index.
template <class T>
void project_top_s(SparseCombiner<T>& combiner, std::size_t s);

// x -> x if |x| > epsilon else 0; zeroed entries join frozen_zero.
template <class T>
void apply_threshold(SparseCombiner<T>& combiner, double epsilon);

template <class T>
struct BatchResult {
  ModelGrads<T> grads;
  double loss = 0.0;       // data loss + l1 term
  double data_loss = 0.0;  // mean cross-entropy
  double l1 = 0.0;         // sum over layers of lambda * l1_of_P
  std::size_t correct = 0;
};

// Loss and gradients of the full objective over a batch. dP includes
// lambda * sign(P) (sign(0) = 0); in threshold mode dP is zero at pinned
// entries. Throws NumericFailure naming the first non-finite layer.
template <class T>
BatchResult<T> backward(std::span<const Sample<T>> batch, const LcnnModel<T>& model,
                        const TrainConfig& cfg);

// Objective value only (same definition as BatchResult::loss).
template <class T>
double objective(std::span<const Sample<T>> batch, const LcnnModel<T>& model);

// What a training step may change in one layer.
struct LayerPolicy {
  enum class PUpdate { kAll, kSupport, kNone };
  PUpdate p = PUpdate::kAll;  // kSupport: only currently nonzero entries
  bool update_dict = true;    // still subject to dict.frozen
  bool update_bias = true;
  bool update_dense = true;   // W of dense layers
  bool enforce = true;        // sparsity enforcement after the update
  double lr_scale = 1.0;
};

using UpdatePolicy = std::vector<LayerPolicy>;  // indexed like model.layers

template <class T>
struct OptimizerState {
  std::vector<LayerGrads<T>> velocity;
};

struct StepResult {
  double loss = 0.0;
  double l1 = 0.0;
  double accuracy = 0.0;  // batch accuracy before the update
};

// One momentum-SGD step followed by sparsity enforcement. `policy` may be
// null (everything trainable). Frozen dictionaries are never written.
template <class T>
StepResult train_step(std::span<const Sample<T>> batch, LcnnModel<T>& model,
                      const TrainConfig& cfg, OptimizerState<T>& state,
                      const UpdatePolicy* policy = nullptr);

// Mean column l0 over all lookup layers in training form (0 when none).
template <class T>
double mean_l0(const LcnnModel<T>& model);

struct IterationLog {
  std::size_t iteration = 0;
  StepResult step;
  double mean_l0 = 0.0;
};

// Runs cfg.iterations steps over shuffled mini-batches (reshuffled per pass,
// seeded from cfg.seed). The callback sees every iteration.
StepResult train(LcnnModel<float>& model, const std::vector<Sample<float>>& data,
                 const TrainConfig& cfg, const UpdatePolicy* policy = nullptr,
                 const std::function<void(const IterationLog&)>& on_step = {});

struct EvalResult {
  std::size_t samples = 0;
  std::size_t top1 = 0;
  std::size_t top5 = 0;
  std::vector<std::size_t> per_class_total;
  std::vector<std::size_t> per_class_correct;

  double top1_accuracy() const { return samples ? double(top1) / double(samples) : 0.0; }
  double top5_accuracy() const { return samples ? double(top5) / double(samples) : 0.0; }
};

template <class T>
EvalResult evaluate(const LcnnModel<T>& model, const std::vector<Sample<T>>& data);

struct FdTensorReport {
  std::size_t layer = 0;
  std::string tensor;  // "P", "D", "bias" or "W"
  std::size_t probed = 0;
  double max_rel_error = 0.0;
};

struct FdReport {
  std::vector<FdTensorReport> tensors;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

// Central differences of objective() against backward() at up to
// `coords_per_tensor` random coordinates per tensor. P coordinates with
// |P| < skip_below are not probed. Relative error is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
struct FdOptions {
  double step = 1e-3;
  std::size_t coords_per_tensor = 20;
  double skip_below = 1e-2;
  std::uint64_t seed = 7;
  Route route = Route::kAuto;
};

FdReport finite_diff_check(const LcnnModel<double>& model,
                           std::span<const Sample<double>> batch, double tolerance,
                           const FdOptions& options = {});

}  // namespace lcnn
