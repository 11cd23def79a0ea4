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

#include "lcnn/layer.hpp"

#include <algorithm>
#include <iostream>
#include <utility>

#include "kernels.hpp"

namespace lcnn {

namespace {

WarningHandler& warning_handler() {
  static WarningHandler handler = [](const std::string& msg) {
    std::cerr << "lcnn warning: " << msg << '\n';
  };
  return handler;
}

}  // namespace

void set_warning_handler(WarningHandler handler) { warning_handler() = std::move(handler); }

void warn(const std::string& message) {
  if (warning_handler()) warning_handler()(message);
}

// ---------------------------------------------------------------------------
// Dictionary

template <class T>
Dictionary<T>::Dictionary(std::size_t k, std::size_t m) : k(k), m(m), data(k * m, T(0)) {}

template <class T>
Dictionary<T>::Dictionary(std::size_t k, std::size_t m, std::vector<T> data, bool frozen)
    : k(k), m(m), data(std::move(data)), frozen(frozen) {
  require(k >= 1 && m >= 1, ErrorKind::kDimension, "dictionary must be at least 1x1");
  require(this->data.size() == k * m, ErrorKind::kDimension,
          "dictionary data length does not match k x m");
}

// ---------------------------------------------------------------------------
// SparseCombiner

template <class T>
SparseCombiner<T>::SparseCombiner(std::size_t n, std::size_t k, std::size_t kh, std::size_t kw)
    : p(n, k, kh, kw), frozen_zero(n * k * kh * kw, 0) {}

template <class T>
SparseCombiner<T>::SparseCombiner(Tensor4<T> values)
    : p(std::move(values)), frozen_zero(p.size(), 0) {}

template <class T>
std::size_t SparseCombiner<T>::column_l0(std::size_t i, std::size_t r, std::size_t c) const {
  std::size_t nz = 0;
  for (std::size_t j = 0; j < k(); ++j) nz += p.at(i, j, r, c) != T(0);
  return nz;
}

template <class T>
std::size_t SparseCombiner<T>::nonzeros() const {
  return static_cast<std::size_t>(
      std::count_if(p.data().begin(), p.data().end(), [](T v) { return v != T(0); }));
}

template <class T>
std::size_t SparseCombiner<T>::max_column_l0() const {
  std::size_t best = 0;
  for (std::size_t i = 0; i < n(); ++i)
    for (std::size_t r = 0; r < kh(); ++r)
      for (std::size_t c = 0; c < kw(); ++c) best = std::max(best, column_l0(i, r, c));
  return best;
}

template <class T>
double SparseCombiner<T>::mean_l0() const {
  const std::size_t columns = n() * kh() * kw();
  return columns == 0 ? 0.0 : static_cast<double>(nonzeros()) / static_cast<double>(columns);
}

// ---------------------------------------------------------------------------
// LookupTables

template <class T>
LookupTables<T>::LookupTables(std::size_t n, std::size_t kh, std::size_t kw)
    : n_(n), kh_(kh), kw_(kw), offsets_(n * kh * kw + 1, 0) {}

template <class T>
LookupTables<T> LookupTables<T>::from_lists(
    std::size_t n, std::size_t kh, std::size_t kw, std::size_t k,
    const std::vector<std::vector<std::uint32_t>>& indices,
    const std::vector<std::vector<T>>& coeffs) {
  const std::size_t taps = n * kh * kw;
  require(indices.size() == taps && coeffs.size() == taps, ErrorKind::kDimension,
          "lookup lists must have one entry per filter tap");
  LookupTables out(n, kh, kw);
  out.offsets_.assign(1, 0);
  std::vector<std::pair<std::uint32_t, T>> terms;
  for (std::size_t t = 0; t < taps; ++t) {
    require(indices[t].size() == coeffs[t].size(), ErrorKind::kDimension,
            "index and coefficient lists differ in length");
    terms.clear();
    for (std::size_t e = 0; e < indices[t].size(); ++e) {
      require(indices[t][e] < k, ErrorKind::kBounds,
              "lookup index " + std::to_string(indices[t][e]) + " >= dictionary size " +
                  std::to_string(k));
      terms.emplace_back(indices[t][e], coeffs[t][e]);
    }
    std::stable_sort(terms.begin(), terms.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t e = 0; e < terms.size();) {
      const std::uint32_t j = terms[e].first;
      T sum = T(0);
      for (; e < terms.size() && terms[e].first == j; ++e) sum += terms[e].second;
      if (sum != T(0)) {
        out.indices_.push_back(j);
        out.coeffs_.push_back(sum);
      }
    }
    out.offsets_.push_back(out.indices_.size());
  }
  return out;
}

template <class T>
LookupTables<T> LookupTables<T>::from_raw(std::size_t n, std::size_t kh, std::size_t kw,
                                          std::size_t k, std::vector<std::size_t> offsets,
                                          std::vector<std::uint32_t> indices,
                                          std::vector<T> coeffs) {
  require(offsets.size() == n * kh * kw + 1 && offsets.front() == 0 &&
              offsets.back() == indices.size() && indices.size() == coeffs.size(),
          ErrorKind::kDimension, "malformed lookup table storage");
  for (std::size_t t = 0; t + 1 < offsets.size(); ++t) {
    require(offsets[t] <= offsets[t + 1], ErrorKind::kFormat, "lookup offsets decrease");
    for (std::size_t e = offsets[t]; e < offsets[t + 1]; ++e) {
      require(indices[e] < k, ErrorKind::kBounds,
              "lookup index " + std::to_string(indices[e]) + " >= dictionary size " +
                  std::to_string(k));
      require(coeffs[e] != T(0), ErrorKind::kFormat, "zero lookup coefficient");
      require(e == offsets[t] || indices[e - 1] < indices[e], ErrorKind::kFormat,
              "lookup indices not strictly increasing");
    }
  }
  LookupTables out(n, kh, kw);
  out.offsets_ = std::move(offsets);
  out.indices_ = std::move(indices);
  out.coeffs_ = std::move(coeffs);
  return out;
}

template <class T>
std::span<const std::uint32_t> LookupTables<T>::indices(std::size_t i, std::size_t r,
                                                        std::size_t c) const {
  const std::size_t t = tap(i, r, c);
  return {indices_.data() + offsets_[t], offsets_[t + 1] - offsets_[t]};
}

template <class T>
std::span<const T> LookupTables<T>::coeffs(std::size_t i, std::size_t r, std::size_t c) const {
  const std::size_t t = tap(i, r, c);
  return {coeffs_.data() + offsets_[t], offsets_[t + 1] - offsets_[t]};
}

template <class T>
std::size_t LookupTables<T>::length(std::size_t i, std::size_t r, std::size_t c) const {
  const std::size_t t = tap(i, r, c);
  return offsets_[t + 1] - offsets_[t];
}

template <class T>
double LookupTables<T>::mean_s() const {
  return taps() == 0 ? 0.0 : static_cast<double>(total_terms()) / static_cast<double>(taps());
}

template <class T>
std::uint32_t LookupTables<T>::max_index() const {
  return indices_.empty() ? 0 : *std::max_element(indices_.begin(), indices_.end());
}

// ---------------------------------------------------------------------------
// LcnnConvLayer

template <class T>
LcnnConvLayer<T> LcnnConvLayer<T>::make(ConvGeom geom, Dictionary<T> dict,
                                        std::variant<SparseCombiner<T>, LookupTables<T>> repr,
                                        std::vector<T> bias) {
  require(dict.k >= 1, ErrorKind::kDimension, "dictionary needs at least one row");
  require(dict.m == geom.m, ErrorKind::kDimension,
          "dictionary width " + std::to_string(dict.m) + " does not match input channels " +
              std::to_string(geom.m));
  require(bias.size() == geom.n, ErrorKind::kDimension, "bias length does not match n");
  if (const auto* comb = std::get_if<SparseCombiner<T>>(&repr)) {
    require(comb->n() == geom.n && comb->k() == dict.k && comb->kh() == geom.kh &&
                comb->kw() == geom.kw && comb->frozen_zero.size() == comb->p.size(),
            ErrorKind::kDimension, "combiner shape does not match layer");
  } else {
    const auto& tables = std::get<LookupTables<T>>(repr);
    require(tables.n() == geom.n && tables.kh() == geom.kh && tables.kw() == geom.kw,
            ErrorKind::kDimension, "lookup tables do not match layer geometry");
    require(tables.total_terms() == 0 || tables.max_index() < dict.k, ErrorKind::kBounds,
            "lookup index exceeds dictionary size");
  }
  if (dict.k >= geom.n * geom.kh * geom.kw)
    warn("dictionary size " + std::to_string(dict.k) + " is not below n*kh*kw = " +
         std::to_string(geom.n * geom.kh * geom.kw));
  return LcnnConvLayer{geom, std::move(dict), std::move(repr), std::move(bias)};
}

template <class T>
SparseCombiner<T>& LcnnConvLayer<T>::combiner() {
  require(mode() == LayerMode::kTraining, ErrorKind::kMode, "layer is in inference mode");
  return std::get<SparseCombiner<T>>(repr);
}

template <class T>
const SparseCombiner<T>& LcnnConvLayer<T>::combiner() const {
  require(mode() == LayerMode::kTraining, ErrorKind::kMode, "layer is in inference mode");
  return std::get<SparseCombiner<T>>(repr);
}

template <class T>
LookupTables<T>& LcnnConvLayer<T>::tables() {
  require(mode() == LayerMode::kInference, ErrorKind::kMode, "layer is in training mode");
  return std::get<LookupTables<T>>(repr);
}

template <class T>
const LookupTables<T>& LcnnConvLayer<T>::tables() const {
  require(mode() == LayerMode::kInference, ErrorKind::kMode, "layer is in training mode");
  return std::get<LookupTables<T>>(repr);
}

// ---------------------------------------------------------------------------
// Operations

template <class T>
Tensor4<T> reconstruct_weights(const Dictionary<T>& dict, const LookupTables<T>& tables,
                               const ConvGeom& geom) {
  require(dict.m == geom.m && tables.n() == geom.n && tables.kh() == geom.kh &&
              tables.kw() == geom.kw,
          ErrorKind::kDimension, "tables or dictionary do not match geometry");
  require(tables.total_terms() == 0 || tables.max_index() < dict.k, ErrorKind::kBounds,
          "lookup index exceeds dictionary size");
  Tensor4<T> w(geom.n, geom.m, geom.kh, geom.kw);
  for (std::size_t i = 0; i < geom.n; ++i) {
    for (std::size_t r = 0; r < geom.kh; ++r) {
      for (std::size_t c = 0; c < geom.kw; ++c) {
        const auto idx = tables.indices(i, r, c);
        const auto coef = tables.coeffs(i, r, c);
        for (std::size_t t = 0; t < idx.size(); ++t) {
          const auto drow = dict.row(idx[t]);
          for (std::size_t ch = 0; ch < geom.m; ++ch) w.at(i, ch, r, c) += coef[t] * drow[ch];
        }
      }
    }
  }
  return w;
}

template <class T>
Tensor4<T> reconstruct_weights(const Dictionary<T>& dict, const SparseCombiner<T>& comb,
                               const ConvGeom& geom) {
  require(dict.m == geom.m && comb.n() == geom.n && comb.k() == dict.k &&
              comb.kh() == geom.kh && comb.kw() == geom.kw,
          ErrorKind::kDimension, "combiner or dictionary do not match geometry");
  Tensor4<T> w(geom.n, geom.m, geom.kh, geom.kw);
  const std::size_t taps = geom.kh * geom.kw;
  for (std::size_t i = 0; i < geom.n; ++i) {
    for (std::size_t j = 0; j < dict.k; ++j) {
      const auto drow = dict.row(j);
      for (std::size_t tap = 0; tap < taps; ++tap) {
        const T pv = comb.p.data()[(i * dict.k + j) * taps + tap];
        if (pv == T(0)) continue;
        T* wcol = w.data().data() + i * geom.m * taps + tap;
        for (std::size_t ch = 0; ch < geom.m; ++ch) wcol[ch * taps] += pv * drow[ch];
      }
    }
  }
  return w;
}

template <class T>
Tensor3<T> conv1x1_all(const Tensor3<T>& x, const Dictionary<T>& dict, OpCount* count) {
  require(dict.m == x.channels(), ErrorKind::kDimension,
          "dictionary width " + std::to_string(dict.m) + " does not match input channels " +
              std::to_string(x.channels()));
  return conv1x1_all(x, std::span<const T>(dict.data), dict.k, count);
}

template <class T>
Tensor3<T> forward_lookup(const Tensor3<T>& x, const LcnnConvLayer<T>& layer,
                          StageCount* count) {
  const ConvGeom& g = layer.geom;
  const LookupTables<T>& tables = layer.tables();
  require(x.shape() == g.input_shape(), ErrorKind::kDimension,
          "lookup input " + to_string(x.shape()) + " does not match layer input " +
              to_string(g.input_shape()));
  const Tensor3<T> s = conv1x1_all(x, layer.dict, count ? &count->precompute : nullptr);
  const Tensor3<T> sp = detail::zero_pad(s, g.pad);
  const std::size_t ow = g.out_w(), oh = g.out_h(), pw = sp.width();
  Tensor3<T> y(g.n, ow, oh);
  std::uint64_t work = 0;
  for (std::size_t i = 0; i < g.n; ++i) {
    T* __restrict out = y.data().data() + i * ow * oh;
    for (std::size_t r = 0; r < g.kh; ++r) {
      for (std::size_t c = 0; c < g.kw; ++c) {
        const auto idx = tables.indices(i, r, c);
        const auto coef = tables.coeffs(i, r, c);
        for (std::size_t t = 0; t < idx.size(); ++t) {
          const T a = coef[t];
          const T* src = sp.data().data() + idx[t] * sp.plane();
          for (std::size_t yo = 0; yo < oh; ++yo) {
            const T* srow = src + (yo * g.stride + r) * pw + c;
            T* orow = out + yo * ow;
            for (std::size_t xo = 0; xo < ow; ++xo) orow[xo] += a * srow[xo * g.stride];
          }
          work += ow * oh;
        }
      }
    }
  }
  if (count) {
    count->scale.mults += work;
    count->scale.adds += work;
    count->scale.lookups += work;
    count->scale.bias_adds += g.n * ow * oh;
  }
  for (std::size_t i = 0; i < g.n; ++i)
    for (T& v : y.channel(i)) v += layer.bias[i];
  return y;
}

template <class T>
Tensor3<T> forward_sparse(const Tensor3<T>& x, const LcnnConvLayer<T>& layer,
                          StageCount* count) {
  const ConvGeom& g = layer.geom;
  const SparseCombiner<T>& comb = layer.combiner();
  require(x.shape() == g.input_shape(), ErrorKind::kDimension,
          "sparse-path input " + to_string(x.shape()) + " does not match layer input " +
              to_string(g.input_shape()));
  const Tensor3<T> s = conv1x1_all(x, layer.dict, count ? &count->precompute : nullptr);
  ConvGeom over_s = g;
  over_s.m = layer.dict.k;
  return conv2d_dense(s, comb.p, std::span<const T>(layer.bias), over_s,
                      count ? &count->scale : nullptr);
}

template <class T>
LookupTables<T> p_to_ic(const SparseCombiner<T>& comb) {
  const std::size_t n = comb.n(), k = comb.k(), kh = comb.kh(), kw = comb.kw();
  std::vector<std::size_t> offsets{0};
  std::vector<std::uint32_t> indices;
  std::vector<T> coeffs;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < kh; ++r) {
      for (std::size_t c = 0; c < kw; ++c) {
        for (std::size_t j = 0; j < k; ++j) {
          const T v = comb.p.at(i, j, r, c);
          if (v == T(0)) continue;
          indices.push_back(static_cast<std::uint32_t>(j));
          coeffs.push_back(v);
        }
        offsets.push_back(indices.size());
      }
    }
  }
  return LookupTables<T>::from_raw(n, kh, kw, k, std::move(offsets), std::move(indices),
                                   std::move(coeffs));
}

template <class T>
SparseCombiner<T> ic_to_p(const LookupTables<T>& tables, std::size_t k) {
  require(tables.total_terms() == 0 || tables.max_index() < k, ErrorKind::kBounds,
          "lookup index exceeds dictionary size " + std::to_string(k));
  SparseCombiner<T> out(tables.n(), k, tables.kh(), tables.kw());
  for (std::size_t i = 0; i < tables.n(); ++i)
    for (std::size_t r = 0; r < tables.kh(); ++r)
      for (std::size_t c = 0; c < tables.kw(); ++c) {
        const auto idx = tables.indices(i, r, c);
        const auto coef = tables.coeffs(i, r, c);
        for (std::size_t t = 0; t < idx.size(); ++t) out.p.at(i, idx[t], r, c) = coef[t];
      }
  return out;
}

ConvGeom fc_as_conv(std::size_t in_features, std::size_t out_features) {
  require(in_features >= 1 && out_features >= 1, ErrorKind::kDimension,
          "fully connected layer needs at least one input and one output");
  return ConvGeom::make(in_features, out_features, 1, 1, 1, 0, 1, 1);
}

template <class T>
void to_inference(LcnnConvLayer<T>& layer) {
  if (layer.mode() == LayerMode::kInference) return;
  layer.repr = p_to_ic(layer.combiner());
}

template <class T>
void to_training(LcnnConvLayer<T>& layer) {
  if (layer.mode() == LayerMode::kTraining) return;
  layer.repr = ic_to_p(layer.tables(), layer.dict.k);
}

#define LCNN_INSTANTIATE_LAYER(T)                                                        \
  template struct Dictionary<T>;                                                         \
  template struct SparseCombiner<T>;                                                     \
  template class LookupTables<T>;                                                        \
  template struct LcnnConvLayer<T>;                                                      \
  template Tensor4<T> reconstruct_weights(const Dictionary<T>&, const LookupTables<T>&,  \
                                          const ConvGeom&);                              \
  template Tensor4<T> reconstruct_weights(const Dictionary<T>&,                          \
                                          const SparseCombiner<T>&, const ConvGeom&);    \
  template Tensor3<T> conv1x1_all(const Tensor3<T>&, const Dictionary<T>&, OpCount*);    \
  template Tensor3<T> forward_lookup(const Tensor3<T>&, const LcnnConvLayer<T>&,         \
                                     StageCount*);                                       \
  template Tensor3<T> forward_sparse(const Tensor3<T>&, const LcnnConvLayer<T>&,         \
                                     StageCount*);                                       \
  template LookupTables<T> p_to_ic(const SparseCombiner<T>&);                            \
  template SparseCombiner<T> ic_to_p(const LookupTables<T>&, std::size_t);               \
  template void to_inference(LcnnConvLayer<T>&);                                         \
  template void to_training(LcnnConvLayer<T>&);

LCNN_INSTANTIATE_LAYER(float)
LCNN_INSTANTIATE_LAYER(double)

#undef LCNN_INSTANTIATE_LAYER

}  // namespace lcnn
