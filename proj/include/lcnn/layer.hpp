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

// Lookup-based convolution layer.
//
// Each output filter is built from the rows of a small k x m dictionary D.
// Two equivalent representations of the combination weights exist:
//
//   training form   P_i in R^{k x kh x kw} per output filter i; the layer
//                   output is (X * D) * P_i, a dense conv over the k
//                   dictionary responses.
//   inference form  per filter and tap (r, c), a short list of dictionary
//                   row indices I and coefficients C; the output is built by
//                   gathering and scaling channels of S = X * D.
//
// p_to_ic / ic_to_p convert between the two exactly.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lcnn/tensor.hpp"

namespace lcnn {

template <class T>
struct Dictionary {
  std::size_t k = 0;
  std::size_t m = 0;
  std::vector<T> data;  // k x m, row-major
  bool frozen = false;

  Dictionary() = default;
  Dictionary(std::size_t k, std::size_t m);
  Dictionary(std::size_t k, std::size_t m, std::vector<T> data, bool frozen = false);

  std::span<const T> row(std::size_t j) const { return {data.data() + j * m, m}; }
  T& at(std::size_t j, std::size_t ch) { return data[j * m + ch]; }
  const T& at(std::size_t j, std::size_t ch) const { return data[j * m + ch]; }

  bool operator==(const Dictionary&) const = default;
};

template <class T>
struct SparseCombiner {
  Tensor4<T> p;                           // n x k x kh x kw
  std::vector<std::uint8_t> frozen_zero;  // same length as p; 1 = pinned at zero
  std::optional<std::size_t> s_max;

  SparseCombiner() = default;
  SparseCombiner(std::size_t n, std::size_t k, std::size_t kh, std::size_t kw);
  explicit SparseCombiner(Tensor4<T> values);

  std::size_t n() const { return p.filters(); }
  std::size_t k() const { return p.channels(); }
  std::size_t kh() const { return p.kh(); }
  std::size_t kw() const { return p.kw(); }

  // Number of nonzeros in the column P_i[:, r, c].
  std::size_t column_l0(std::size_t i, std::size_t r, std::size_t c) const;
  std::size_t nonzeros() const;
  std::size_t max_column_l0() const;
  // Mean column l0 over all n * kh * kw columns.
  double mean_l0() const;

  bool operator==(const SparseCombiner&) const = default;
};

// Ragged per-(filter, tap) index/coefficient lists in canonical form:
// strictly increasing indices, no zero coefficients.
template <class T>
class LookupTables {
 public:
  LookupTables() = default;
  // All lists empty.
  LookupTables(std::size_t n, std::size_t kh, std::size_t kw);

  // Builds from one list pair per (i, r, c), ordered i-major then r then c.
  // Duplicate indices are merged by summing their coefficients; zero
  // coefficients are dropped; indices must be < k.
  static LookupTables from_lists(std::size_t n, std::size_t kh, std::size_t kw,
                                 std::size_t k,
                                 const std::vector<std::vector<std::uint32_t>>& indices,
                                 const std::vector<std::vector<T>>& coeffs);

  // Raw canonical storage; validated against k.
  static LookupTables from_raw(std::size_t n, std::size_t kh, std::size_t kw, std::size_t k,
                               std::vector<std::size_t> offsets,
                               std::vector<std::uint32_t> indices, std::vector<T> coeffs);

  std::size_t n() const { return n_; }
  std::size_t kh() const { return kh_; }
  std::size_t kw() const { return kw_; }
  std::size_t taps() const { return n_ * kh_ * kw_; }

  std::span<const std::uint32_t> indices(std::size_t i, std::size_t r, std::size_t c) const;
  std::span<const T> coeffs(std::size_t i, std::size_t r, std::size_t c) const;
  std::size_t length(std::size_t i, std::size_t r, std::size_t c) const;

  // Sum of all list lengths.
  std::size_t total_terms() const { return indices_.size(); }
  double mean_s() const;
  std::uint32_t max_index() const;

  const std::vector<std::size_t>& offsets() const { return offsets_; }
  const std::vector<std::uint32_t>& all_indices() const { return indices_; }
  const std::vector<T>& all_coeffs() const { return coeffs_; }
  std::vector<T>& mutable_coeffs() { return coeffs_; }

  bool operator==(const LookupTables&) const = default;

 private:
  std::size_t tap(std::size_t i, std::size_t r, std::size_t c) const {
    return (i * kh_ + r) * kw_ + c;
  }

  std::size_t n_ = 0, kh_ = 0, kw_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::uint32_t> indices_;
  std::vector<T> coeffs_;
};

enum class LayerMode { kTraining, kInference };

template <class T>
struct LcnnConvLayer {
  ConvGeom geom;
  Dictionary<T> dict;
  std::variant<SparseCombiner<T>, LookupTables<T>> repr;
  std::vector<T> bias;

  // Validates shapes: dict.m == geom.m, combiner/tables match geom and k,
  // bias length n. Emits a warning (not an error) when k >= n * kh * kw.
  static LcnnConvLayer make(ConvGeom geom, Dictionary<T> dict,
                            std::variant<SparseCombiner<T>, LookupTables<T>> repr,
                            std::vector<T> bias);

  LayerMode mode() const {
    return repr.index() == 0 ? LayerMode::kTraining : LayerMode::kInference;
  }
  SparseCombiner<T>& combiner();
  const SparseCombiner<T>& combiner() const;
  LookupTables<T>& tables();
  const LookupTables<T>& tables() const;

  bool operator==(const LcnnConvLayer&) const = default;
};

template <class T>
struct DenseConvLayer {
  ConvGeom geom;
  Tensor4<T> w;
  std::vector<T> bias;

  bool operator==(const DenseConvLayer&) const = default;
};

// Forward instrumentation split by stage.
struct StageCount {
  OpCount precompute;  // S = X * D
  OpCount scale;       // lookup-and-scale (or S * P)

  OpCount total() const {
    OpCount t = precompute;
    t += scale;
    return t;
  }
};

// W[i, :, r, c] = sum_t C[i][r][c][t] * D[I[i][r][c][t], :].
template <class T>
Tensor4<T> reconstruct_weights(const Dictionary<T>& dict, const LookupTables<T>& tables,
                               const ConvGeom& geom);

// Same reconstruction read straight from the training form:
// W[i, ch, r, c] = sum_j P_i[j, r, c] * D[j, ch].
template <class T>
Tensor4<T> reconstruct_weights(const Dictionary<T>& dict, const SparseCombiner<T>& combiner,
                               const ConvGeom& geom);

template <class T>
Tensor3<T> conv1x1_all(const Tensor3<T>& x, const Dictionary<T>& dict,
                       OpCount* count = nullptr);

// Inference path: one S precompute, then gather-and-scale per filter.
template <class T>
Tensor3<T> forward_lookup(const Tensor3<T>& x, const LcnnConvLayer<T>& layer,
                          StageCount* count = nullptr);

// Training path: S precompute followed by a dense conv of S with each P_i.
template <class T>
Tensor3<T> forward_sparse(const Tensor3<T>& x, const LcnnConvLayer<T>& layer,
                          StageCount* count = nullptr);

template <class T>
LookupTables<T> p_to_ic(const SparseCombiner<T>& combiner);

template <class T>
SparseCombiner<T> ic_to_p(const LookupTables<T>& tables, std::size_t k);

// Geometry of a fully connected in -> out layer viewed as a 1x1 conv over an
// in x 1 x 1 input.
ConvGeom fc_as_conv(std::size_t in_features, std::size_t out_features);

// Converts a layer between representations in place. No-op when already in
// the requested mode.
template <class T>
void to_inference(LcnnConvLayer<T>& layer);
template <class T>
void to_training(LcnnConvLayer<T>& layer);

// Warning sink for non-fatal construction diagnostics. Defaults to stderr.
using WarningHandler = std::function<void(const std::string&)>;
void set_warning_handler(WarningHandler handler);
void warn(const std::string& message);

}  // namespace lcnn
