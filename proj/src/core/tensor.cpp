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

#include "lcnn/tensor.hpp"

#include <cmath>

#include "kernels.hpp"

namespace lcnn {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimension: return "dimension error";
    case ErrorKind::kBounds: return "bounds error";
    case ErrorKind::kUnsupportedGeometry: return "unsupported geometry";
    case ErrorKind::kNumeric: return "numeric failure";
    case ErrorKind::kMode: return "mode error";
    case ErrorKind::kStructure: return "structure error";
    case ErrorKind::kTransfer: return "transfer error";
    case ErrorKind::kContract: return "contract error";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kData: return "data error";
    case ErrorKind::kIo: return "i/o error";
  }
  return "error";
}

std::string to_string(const Shape3& s) {
  return std::to_string(s.channels) + "x" + std::to_string(s.width) + "x" +
         std::to_string(s.height);
}

template <class T>
Tensor3<T>::Tensor3(std::size_t channels, std::size_t width, std::size_t height,
                    std::vector<T> data)
    : shape_{channels, width, height}, data_(std::move(data)) {
  require(data_.size() == shape_.size(), ErrorKind::kDimension,
          "Tensor3 data length " + std::to_string(data_.size()) + " does not match " +
              to_string(shape_));
}

template <class T>
Tensor3<T> Tensor3<T>::reshaped(Shape3 shape) const {
  return Tensor3<T>(shape.channels, shape.width, shape.height, data_);
}

template <class T>
Tensor4<T>::Tensor4(std::size_t filters, std::size_t channels, std::size_t kh,
                    std::size_t kw, std::vector<T> data)
    : filters_(filters), channels_(channels), kh_(kh), kw_(kw), data_(std::move(data)) {
  require(data_.size() == filters * channels * kh * kw, ErrorKind::kDimension,
          "Tensor4 data length does not match its dims");
}

ConvGeom ConvGeom::make(std::size_t m, std::size_t n, std::size_t kh, std::size_t kw,
                        std::size_t stride, std::size_t pad, std::size_t in_w,
                        std::size_t in_h) {
  require(m > 0 && n > 0 && kh > 0 && kw > 0 && in_w > 0 && in_h > 0,
          ErrorKind::kDimension, "convolution counts must be positive");
  require(stride > 0, ErrorKind::kDimension, "stride must be positive");
  require(in_w + 2 * pad >= kw && in_h + 2 * pad >= kh, ErrorKind::kDimension,
          "kernel larger than padded input");
  require((in_w + 2 * pad - kw) % stride == 0 && (in_h + 2 * pad - kh) % stride == 0,
          ErrorKind::kDimension,
          "stride " + std::to_string(stride) + " does not tile padded input " +
              std::to_string(in_w) + "x" + std::to_string(in_h) + " with kernel " +
              std::to_string(kh) + "x" + std::to_string(kw) + " pad " +
              std::to_string(pad));
  return ConvGeom{m, n, kh, kw, stride, pad, in_w, in_h};
}

OpCount& OpCount::operator+=(const OpCount& o) {
  mults += o.mults;
  adds += o.adds;
  lookups += o.lookups;
  bias_adds += o.bias_adds;
  bytes_params += o.bytes_params;
  return *this;
}

template <class T>
Tensor3<T> shift_crop(const Tensor3<T>& t, std::ptrdiff_t dr, std::ptrdiff_t dc,
                      std::size_t out_w, std::size_t out_h) {
  Tensor3<T> out(t.channels(), out_w, out_h);
  const auto w = static_cast<std::ptrdiff_t>(t.width());
  const auto h = static_cast<std::ptrdiff_t>(t.height());
  for (std::size_t ch = 0; ch < t.channels(); ++ch) {
    for (std::size_t y = 0; y < out_h; ++y) {
      const std::ptrdiff_t ys = static_cast<std::ptrdiff_t>(y) + dr;
      if (ys < 0 || ys >= h) continue;
      for (std::size_t x = 0; x < out_w; ++x) {
        const std::ptrdiff_t xs = static_cast<std::ptrdiff_t>(x) + dc;
        if (xs < 0 || xs >= w) continue;
        out.at(ch, x, y) = t.at(ch, static_cast<std::size_t>(xs), static_cast<std::size_t>(ys));
      }
    }
  }
  return out;
}

template <class T>
Tensor3<T> shift2d(const Tensor3<T>& t, std::ptrdiff_t dr, std::ptrdiff_t dc) {
  return shift_crop(t, -dr, -dc, t.width(), t.height());
}

namespace {

template <class T>
void check_conv_inputs(const Tensor3<T>& x, const Tensor4<T>& w, const ConvGeom& g) {
  require(x.shape() == g.input_shape(), ErrorKind::kDimension,
          "conv input " + to_string(x.shape()) + " does not match geometry " +
              to_string(g.input_shape()));
  require(w.filters() == g.n && w.channels() == g.m && w.kh() == g.kh && w.kw() == g.kw,
          ErrorKind::kDimension, "conv weights do not match geometry");
}

}  // namespace

template <class T>
Tensor3<T> conv2d_dense(const Tensor3<T>& x, const Tensor4<T>& w, std::span<const T> bias,
                        const ConvGeom& g, OpCount* count) {
  check_conv_inputs(x, w, g);
  require(bias.empty() || bias.size() == g.n, ErrorKind::kDimension,
          "bias length does not match filter count");
  const std::size_t cols = g.out_w() * g.out_h();
  const std::size_t q = w.filter_size();
  const std::vector<T> colmat = detail::im2col(x, g);
  Tensor3<T> y(g.n, g.out_w(), g.out_h());
  detail::gemm_nn(g.n, cols, q, w.data().data(), colmat.data(), y.data().data());
  if (count) {
    count->mults += g.n * q * cols;
    count->adds += g.n * q * cols;
  }
  if (!bias.empty()) {
    for (std::size_t i = 0; i < g.n; ++i)
      for (T& v : y.channel(i)) v += bias[i];
    if (count) count->bias_adds += g.n * cols;
  }
  return y;
}

template <class T>
Tensor3<T> conv2d_as_shifted_sum(const Tensor3<T>& x, const Tensor4<T>& w,
                                 const ConvGeom& g) {
  check_conv_inputs(x, w, g);
  require(g.stride == 1, ErrorKind::kUnsupportedGeometry,
          "shifted-sum decomposition is defined for stride 1 only");
  Tensor3<T> y(g.n, g.out_w(), g.out_h());
  std::vector<T> tap(g.n * g.m);
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  for (std::size_t r = 0; r < g.kh; ++r) {
    for (std::size_t c = 0; c < g.kw; ++c) {
      for (std::size_t i = 0; i < g.n; ++i)
        for (std::size_t ch = 0; ch < g.m; ++ch) tap[i * g.m + ch] = w.at(i, ch, r, c);
      const Tensor3<T> z = conv1x1_all(x, std::span<const T>(tap), g.n);
      const Tensor3<T> shifted = shift_crop(z, static_cast<std::ptrdiff_t>(r) - pad,
                                            static_cast<std::ptrdiff_t>(c) - pad,
                                            g.out_w(), g.out_h());
      for (std::size_t e = 0; e < y.size(); ++e) y.data()[e] += shifted.data()[e];
    }
  }
  return y;
}

template <class T>
Tensor3<T> conv1x1_all(const Tensor3<T>& x, std::span<const T> d, std::size_t k,
                       OpCount* count) {
  require(d.size() == k * x.channels(), ErrorKind::kDimension,
          "dictionary width does not match input channels " +
              std::to_string(x.channels()));
  Tensor3<T> s(k, x.width(), x.height());
  detail::gemm_nn(k, x.plane(), x.channels(), d.data(), x.data().data(), s.data().data());
  if (count) {
    count->mults += k * x.channels() * x.plane();
    count->adds += k * x.channels() * x.plane();
  }
  return s;
}

template <class T>
Tensor4<T> one_hot_kernel(std::size_t t, std::size_t r, std::size_t c, std::size_t k,
                          std::size_t kh, std::size_t kw) {
  require(t < k && r < kh && c < kw, ErrorKind::kBounds,
          "one-hot position out of range");
  Tensor4<T> out(1, k, kh, kw);
  out.at(0, t, r, c) = T(1);
  return out;
}

template <class T>
bool all_finite(std::span<const T> values) {
  for (const T v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

#define LCNN_INSTANTIATE_TENSOR(T)                                                      \
  template class Tensor3<T>;                                                            \
  template class Tensor4<T>;                                                            \
  template Tensor3<T> shift2d(const Tensor3<T>&, std::ptrdiff_t, std::ptrdiff_t);       \
  template Tensor3<T> shift_crop(const Tensor3<T>&, std::ptrdiff_t, std::ptrdiff_t,     \
                                 std::size_t, std::size_t);                             \
  template Tensor3<T> conv2d_dense(const Tensor3<T>&, const Tensor4<T>&,                \
                                   std::span<const T>, const ConvGeom&, OpCount*);      \
  template Tensor3<T> conv2d_as_shifted_sum(const Tensor3<T>&, const Tensor4<T>&,       \
                                            const ConvGeom&);                           \
  template Tensor3<T> conv1x1_all(const Tensor3<T>&, std::span<const T>, std::size_t,   \
                                  OpCount*);                                            \
  template Tensor4<T> one_hot_kernel<T>(std::size_t, std::size_t, std::size_t,          \
                                        std::size_t, std::size_t, std::size_t);         \
  template bool all_finite(std::span<const T>);

LCNN_INSTANTIATE_TENSOR(float)
LCNN_INSTANTIATE_TENSOR(double)

#undef LCNN_INSTANTIATE_TENSOR

}  // namespace lcnn
