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

#include "lcnn/executor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "kernels.hpp"

namespace lcnn {

const char* to_string(Route route) {
  switch (route) {
    case Route::kAuto: return "auto";
    case Route::kSparse: return "sparse";
    case Route::kFactored: return "factored";
  }
  return "?";
}

Route route_from_string(const std::string& name) {
  if (name == "auto") return Route::kAuto;
  if (name == "sparse") return Route::kSparse;
  if (name == "factored") return Route::kFactored;
  fail(ErrorKind::kConfig, "unknown route '" + name + "'");
}

std::size_t sparse_route_cost(const ConvGeom& g, std::size_t k) {
  return k * g.m * g.in_w * g.in_h + g.n * k * g.taps() * g.out_w() * g.out_h();
}

std::size_t factored_route_cost(const ConvGeom& g) {
  return g.n * g.m * g.taps() * g.out_w() * g.out_h();
}

template <class T>
Executor<T>::Executor(const LcnnModel<T>& model, Route route)
    : model_(model), routes_(model.layers.size(), Route::kAuto),
      weights_(model.layers.size()) {
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const Layer<T>& layer = model.layers[l];
    if (!layer.lcnn || layer.lcnn->mode() != LayerMode::kTraining) continue;
    const ConvGeom& g = layer.lcnn->geom;
    Route r = route;
    if (r == Route::kAuto)
      r = factored_route_cost(g) <= sparse_route_cost(g, layer.lcnn->dict.k) ? Route::kFactored
                                                                             : Route::kSparse;
    routes_[l] = r;
    if (r == Route::kFactored)
      weights_[l] = reconstruct_weights(layer.lcnn->dict, layer.lcnn->combiner(), g);
  }
}

namespace {

template <class T>
Tensor3<T> max_pool(const Tensor3<T>& x, const PoolGeom& pg, std::vector<std::size_t>* argmax) {
  const std::size_t ow = pg.out(x.width()), oh = pg.out(x.height());
  Tensor3<T> y(x.channels(), ow, oh);
  if (argmax) argmax->assign(y.size(), 0);
  const auto pad = static_cast<std::ptrdiff_t>(pg.pad);
  const auto w = static_cast<std::ptrdiff_t>(x.width());
  const auto h = static_cast<std::ptrdiff_t>(x.height());
  for (std::size_t ch = 0; ch < x.channels(); ++ch) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        T best = -std::numeric_limits<T>::infinity();
        std::size_t where = 0;
        for (std::size_t i = 0; i < pg.kernel; ++i) {
          const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(oy * pg.stride + i) - pad;
          if (yy < 0 || yy >= h) continue;
          for (std::size_t j = 0; j < pg.kernel; ++j) {
            const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(ox * pg.stride + j) - pad;
            if (xx < 0 || xx >= w) continue;
            const std::size_t flat =
                (ch * x.height() + static_cast<std::size_t>(yy)) * x.width() +
                static_cast<std::size_t>(xx);
            if (x.data()[flat] > best) {
              best = x.data()[flat];
              where = flat;
            }
          }
        }
        y.at(ch, ox, oy) = best;
        if (argmax) (*argmax)[(ch * oh + oy) * ow + ox] = where;
      }
    }
  }
  return y;
}

template <class T>
void add_channel_sums(const Tensor3<T>& g, std::vector<T>& dbias) {
  for (std::size_t i = 0; i < g.channels(); ++i) {
    T s = T(0);
    for (const T v : g.channel(i)) s += v;
    dbias[i] += s;
  }
}

// dW += g * colsᵀ and returns col2im(Wᵀ g) when `want_dx`.
template <class T>
Tensor3<T> conv_backward(const Tensor3<T>& x, const Tensor4<T>& w, const ConvGeom& geom,
                         const Tensor3<T>& g, std::vector<T>& dw, bool want_dx) {
  const std::size_t cols = geom.out_w() * geom.out_h();
  const std::size_t q = w.filter_size();
  const std::vector<T> colmat = detail::im2col(x, geom);
  const std::vector<T> colt = detail::transpose(colmat.data(), q, cols);
  detail::gemm_nn(geom.n, q, cols, g.data().data(), colt.data(), dw.data());
  if (!want_dx) return {};
  std::vector<T> dcols(q * cols, T(0));
  detail::gemm_tn(q, cols, geom.n, w.data().data(), g.data().data(), dcols.data());
  return detail::col2im(dcols, geom);
}

}  // namespace

template <class T>
Tensor3<T> Executor<T>::forward(const Tensor3<T>& x, Trace<T>* trace,
                                std::vector<StageCount>* counts) const {
  require(x.shape() == model_.input, ErrorKind::kDimension,
          "model input " + to_string(x.shape()) + " does not match expected " +
              to_string(model_.input));
  const std::size_t L = model_.layers.size();
  if (trace) {
    trace->inputs.assign(L, {});
    trace->s.assign(L, {});
    trace->argmax.assign(L, {});
  }
  if (counts) counts->assign(L, {});
  std::vector<Tensor3<T>> skips;
  Tensor3<T> cur = x;
  for (std::size_t l = 0; l < L; ++l) {
    const Layer<T>& layer = model_.layers[l];
    StageCount* cnt = counts ? &(*counts)[l] : nullptr;
    if (trace) trace->inputs[l] = cur;
    switch (layer.kind) {
      case LayerKind::kLcnnConv:
      case LayerKind::kLcnnFc: {
        const LcnnConvLayer<T>& lc = *layer.lcnn;
        if (lc.mode() == LayerMode::kInference) {
          cur = forward_lookup(cur.reshaped(lc.geom.input_shape()), lc, cnt);
        } else if (routes_[l] == Route::kSparse) {
          Tensor3<T> s = conv1x1_all(cur.reshaped(lc.geom.input_shape()), lc.dict,
                                     cnt ? &cnt->precompute : nullptr);
          ConvGeom over_s = lc.geom;
          over_s.m = lc.dict.k;
          cur = conv2d_dense(s, lc.combiner().p, std::span<const T>(lc.bias), over_s,
                             cnt ? &cnt->scale : nullptr);
          if (trace) trace->s[l] = std::move(s);
        } else {
          cur = conv2d_dense(cur.reshaped(lc.geom.input_shape()), weights_[l],
                             std::span<const T>(lc.bias), lc.geom,
                             cnt ? &cnt->scale : nullptr);
        }
        break;
      }
      case LayerKind::kDenseConv:
      case LayerKind::kDenseFc: {
        const DenseConvLayer<T>& d = *layer.dense;
        cur = conv2d_dense(cur.reshaped(d.geom.input_shape()), d.w, std::span<const T>(d.bias),
                           d.geom, cnt ? &cnt->scale : nullptr);
        break;
      }
      case LayerKind::kRelu:
        for (T& v : cur.data()) v = v > T(0) ? v : T(0);
        break;
      case LayerKind::kMaxPool:
        cur = max_pool(cur, layer.pool, trace ? &trace->argmax[l] : nullptr);
        break;
      case LayerKind::kGlobalAvgPool: {
        Tensor3<T> out(cur.channels(), 1, 1);
        for (std::size_t ch = 0; ch < cur.channels(); ++ch) {
          T s = T(0);
          for (const T v : cur.channel(ch)) s += v;
          out.data()[ch] = s / static_cast<T>(cur.plane());
        }
        cur = std::move(out);
        break;
      }
      case LayerKind::kFlatten:
        cur = cur.reshaped({cur.size(), 1, 1});
        break;
      case LayerKind::kSkipSave:
        skips.push_back(cur);
        break;
      case LayerKind::kSkipAdd: {
        require(!skips.empty() && skips.back().shape() == cur.shape(), ErrorKind::kStructure,
                "unbalanced skip connection at layer '" + layer.name + "'");
        const Tensor3<T>& s = skips.back();
        for (std::size_t e = 0; e < cur.size(); ++e) cur.data()[e] += s.data()[e];
        skips.pop_back();
        break;
      }
    }
  }
  if (trace) trace->output = cur;
  return cur;
}

template <class T>
GradAccumulator<T> Executor<T>::make_accumulator() const {
  GradAccumulator<T> acc;
  acc.layers.resize(model_.layers.size());
  for (std::size_t l = 0; l < model_.layers.size(); ++l) {
    const Layer<T>& layer = model_.layers[l];
    LayerGrads<T>& g = acc.layers[l];
    if (layer.lcnn) {
      const auto& lc = *layer.lcnn;
      g.dBias.assign(lc.geom.n, T(0));
      if (routes_[l] == Route::kFactored) {
        g.dW.assign(lc.geom.n * lc.geom.m * lc.geom.taps(), T(0));
      } else {
        g.dP.assign(lc.geom.n * lc.dict.k * lc.geom.taps(), T(0));
        g.dD.assign(lc.dict.k * lc.dict.m, T(0));
      }
    } else if (layer.dense) {
      g.dW.assign(layer.dense->w.size(), T(0));
      g.dBias.assign(layer.dense->geom.n, T(0));
    }
  }
  return acc;
}

template <class T>
void Executor<T>::backward(const Trace<T>& trace, const Tensor3<T>& grad_out,
                           GradAccumulator<T>& acc) const {
  const std::size_t L = model_.layers.size();
  require(trace.inputs.size() == L && acc.layers.size() == L, ErrorKind::kStructure,
          "trace or accumulator does not belong to this model");
  std::vector<Tensor3<T>> skip_grads;
  Tensor3<T> g = grad_out;
  for (std::size_t l = L; l-- > 0;) {
    const Layer<T>& layer = model_.layers[l];
    const Tensor3<T>& x = trace.inputs[l];
    const bool want_dx = l > 0;
    LayerGrads<T>& lg = acc.layers[l];
    switch (layer.kind) {
      case LayerKind::kLcnnConv:
      case LayerKind::kLcnnFc: {
        const LcnnConvLayer<T>& lc = *layer.lcnn;
        require(lc.mode() == LayerMode::kTraining, ErrorKind::kMode,
                "layer '" + layer.name + "' is in inference mode; convert to training first");
        const ConvGeom& geom = lc.geom;
        const Tensor3<T> xin = x.reshaped(geom.input_shape());
        add_channel_sums(g, lg.dBias);
        if (routes_[l] == Route::kFactored) {
          g = conv_backward(xin, weights_[l], geom, g, lg.dW, want_dx);
          if (want_dx) g = g.reshaped(x.shape());
          break;
        }
        // Sparse route: Y = S * P, S = D x X.
        const Tensor3<T>& s = trace.s[l];
        ConvGeom over_s = geom;
        over_s.m = lc.dict.k;
        const Tensor3<T> ds = conv_backward(s, lc.combiner().p, over_s, g, lg.dP, true);
        const std::size_t plane = geom.in_w * geom.in_h;
        const std::vector<T> xt = detail::transpose(xin.data().data(), geom.m, plane);
        detail::gemm_nn(lc.dict.k, geom.m, plane, ds.data().data(), xt.data(), lg.dD.data());
        if (want_dx) {
          Tensor3<T> dx(geom.m, geom.in_w, geom.in_h);
          detail::gemm_tn(geom.m, plane, lc.dict.k, lc.dict.data.data(), ds.data().data(),
                          dx.data().data());
          g = dx.reshaped(x.shape());
        }
        break;
      }
      case LayerKind::kDenseConv:
      case LayerKind::kDenseFc: {
        const DenseConvLayer<T>& d = *layer.dense;
        add_channel_sums(g, lg.dBias);
        g = conv_backward(x.reshaped(d.geom.input_shape()), d.w, d.geom, g, lg.dW, want_dx);
        if (want_dx) g = g.reshaped(x.shape());
        break;
      }
      case LayerKind::kRelu:
        for (std::size_t e = 0; e < g.size(); ++e)
          if (!(x.data()[e] > T(0))) g.data()[e] = T(0);
        break;
      case LayerKind::kMaxPool: {
        Tensor3<T> dx(x.shape());
        const auto& am = trace.argmax[l];
        for (std::size_t e = 0; e < g.size(); ++e) dx.data()[am[e]] += g.data()[e];
        g = std::move(dx);
        break;
      }
      case LayerKind::kGlobalAvgPool: {
        Tensor3<T> dx(x.shape());
        const T inv = T(1) / static_cast<T>(x.plane());
        for (std::size_t ch = 0; ch < x.channels(); ++ch)
          for (T& v : dx.channel(ch)) v = g.data()[ch] * inv;
        g = std::move(dx);
        break;
      }
      case LayerKind::kFlatten:
        g = g.reshaped(x.shape());
        break;
      case LayerKind::kSkipAdd:
        skip_grads.push_back(g);
        break;
      case LayerKind::kSkipSave: {
        require(!skip_grads.empty(), ErrorKind::kStructure, "unbalanced skip connection");
        const Tensor3<T>& sg = skip_grads.back();
        for (std::size_t e = 0; e < g.size(); ++e) g.data()[e] += sg.data()[e];
        skip_grads.pop_back();
        break;
      }
    }
  }
}

template <class T>
ModelGrads<T> Executor<T>::finalize(GradAccumulator<T> acc, T scale) const {
  ModelGrads<T> out;
  out.layers = std::move(acc.layers);
  for (std::size_t l = 0; l < out.layers.size(); ++l) {
    LayerGrads<T>& g = out.layers[l];
    const Layer<T>& layer = model_.layers[l];
    if (layer.lcnn && routes_[l] == Route::kFactored) {
      const auto& lc = *layer.lcnn;
      const std::size_t k = lc.dict.k, m = lc.dict.m, taps = lc.geom.taps();
      const auto& p = lc.combiner().p.data();
      g.dP.assign(lc.geom.n * k * taps, T(0));
      g.dD.assign(k * m, T(0));
      for (std::size_t i = 0; i < lc.geom.n; ++i) {
        const T* dwi = g.dW.data() + i * m * taps;  // m x taps
        detail::gemm_nn(k, taps, m, lc.dict.data.data(), dwi, g.dP.data() + i * k * taps);
        const std::vector<T> dwt = detail::transpose(dwi, m, taps);
        detail::gemm_nn(k, m, taps, p.data() + i * k * taps, dwt.data(), g.dD.data());
      }
      g.dW.clear();
    }
    for (auto* v : {&g.dP, &g.dD, &g.dW, &g.dBias})
      for (T& e : *v) e *= scale;
  }
  return out;
}

template <class T>
LossResult<T> softmax_cross_entropy(const Tensor3<T>& logits, std::size_t label) {
  const auto& z = logits.data();
  require(label < z.size(), ErrorKind::kBounds,
          "label " + std::to_string(label) + " out of range for " + std::to_string(z.size()) +
              " classes");
  const T zmax = *std::max_element(z.begin(), z.end());
  T sum = T(0);
  for (const T v : z) sum += std::exp(v - zmax);
  LossResult<T> r;
  r.loss = std::log(sum) - (z[label] - zmax);
  r.grad = Tensor3<T>(logits.shape());
  for (std::size_t c = 0; c < z.size(); ++c) r.grad.data()[c] = std::exp(z[c] - zmax) / sum;
  r.grad.data()[label] -= T(1);
  return r;
}

template <class T>
std::size_t argmax_class(const Tensor3<T>& logits) {
  const auto& z = logits.data();
  std::size_t best = 0;
  for (std::size_t c = 1; c < z.size(); ++c)
    if (z[c] > z[best]) best = c;
  return best;
}

template <class T>
std::vector<std::size_t> ranked_classes(const Tensor3<T>& logits) {
  const auto& z = logits.data();
  std::vector<std::size_t> order(z.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return z[a] > z[b]; });
  return order;
}

template class Executor<float>;
template class Executor<double>;
template LossResult<float> softmax_cross_entropy(const Tensor3<float>&, std::size_t);
template LossResult<double> softmax_cross_entropy(const Tensor3<double>&, std::size_t);
template std::size_t argmax_class(const Tensor3<float>&);
template std::size_t argmax_class(const Tensor3<double>&);
template std::vector<std::size_t> ranked_classes(const Tensor3<float>&);
template std::vector<std::size_t> ranked_classes(const Tensor3<double>&);

}  // namespace lcnn
