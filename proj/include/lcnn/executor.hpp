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

// Forward and backward evaluation of a model.
//
// A lookup layer in training form can be evaluated two equivalent ways:
//   sparse    S = X * D, then S * P_i (a dense conv over the k responses)
//   factored  W = reconstruct(D, P) once per batch, then X * W
// Both give the same outputs and gradients up to rounding. kAuto picks, per
// layer, the one with fewer multiply-adds per sample.

#include <cstddef>
#include <vector>

#include "lcnn/model.hpp"

namespace lcnn {

enum class Route { kAuto, kSparse, kFactored };

const char* to_string(Route route);
Route route_from_string(const std::string& name);

template <class T>
struct Trace {
  std::vector<Tensor3<T>> inputs;           // input of each layer
  std::vector<Tensor3<T>> s;                // S per layer (sparse route only)
  std::vector<std::vector<std::size_t>> argmax;  // max-pool winners
  Tensor3<T> output;
};

// Gradients of one parameterized layer. Empty vectors for tensors the layer
// does not own.
template <class T>
struct LayerGrads {
  std::vector<T> dP;     // n x k x kh x kw (lookup layers)
  std::vector<T> dD;     // k x m (lookup layers)
  std::vector<T> dW;     // n x m x kh x kw (dense layers)
  std::vector<T> dBias;  // n

  bool empty() const { return dP.empty() && dD.empty() && dW.empty() && dBias.empty(); }
};

template <class T>
struct ModelGrads {
  std::vector<LayerGrads<T>> layers;  // indexed like model.layers
};

// Running sum of per-sample gradients. For factored-route lookup layers it
// holds dL/dW, converted to (dP, dD) in Executor::finalize.
template <class T>
struct GradAccumulator {
  std::vector<LayerGrads<T>> layers;
};

template <class T>
class Executor {
 public:
  explicit Executor(const LcnnModel<T>& model, Route route = Route::kAuto);

  const LcnnModel<T>& model() const { return model_; }
  Route route(std::size_t layer) const { return routes_[layer]; }

  // `counts`, when given, receives one entry per layer.
  Tensor3<T> forward(const Tensor3<T>& x, Trace<T>* trace = nullptr,
                     std::vector<StageCount>* counts = nullptr) const;

  GradAccumulator<T> make_accumulator() const;

  // Adds the parameter gradients of one traced sample, given dL/d(output).
  void backward(const Trace<T>& trace, const Tensor3<T>& grad_out,
                GradAccumulator<T>& acc) const;

  // Scales the accumulated sums and maps factored dW onto dP and dD.
  ModelGrads<T> finalize(GradAccumulator<T> acc, T scale) const;

 private:
  const LcnnModel<T>& model_;
  std::vector<Route> routes_;
  std::vector<Tensor4<T>> weights_;  // reconstructed W for factored layers
};

// Per-sample multiply-adds of each route for a training-form lookup layer.
std::size_t sparse_route_cost(const ConvGeom& g, std::size_t k);
std::size_t factored_route_cost(const ConvGeom& g);

template <class T>
struct LossResult {
  T loss = T(0);
  Tensor3<T> grad;  // dL/dlogits
};

// Softmax cross-entropy of a num_classes x 1 x 1 logit tensor.
template <class T>
LossResult<T> softmax_cross_entropy(const Tensor3<T>& logits, std::size_t label);

// Index of the largest logit; the lowest class id wins ties.
template <class T>
std::size_t argmax_class(const Tensor3<T>& logits);

// Classes ordered by descending logit, ties broken by lower class id.
template <class T>
std::vector<std::size_t> ranked_classes(const Tensor3<T>& logits);

}  // namespace lcnn
