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

// Dense tensors, convolution geometry and the reference convolution kernels.
//
// Storage is channel-major, then row-major: element (ch, x, y) of a
// channels x width x height tensor lives at ((ch * height) + y) * width + x,
// where x indexes columns and y indexes rows. Convolutions are
// cross-correlations (no kernel flip).

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lcnn/error.hpp"

namespace lcnn {

struct Shape3 {
  std::size_t channels = 0;
  std::size_t width = 0;
  std::size_t height = 0;

  std::size_t size() const { return channels * width * height; }
  bool operator==(const Shape3&) const = default;
};

std::string to_string(const Shape3& s);

template <class T>
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t channels, std::size_t width, std::size_t height)
      : shape_{channels, width, height}, data_(shape_.size(), T(0)) {}
  explicit Tensor3(Shape3 shape) : Tensor3(shape.channels, shape.width, shape.height) {}
  Tensor3(std::size_t channels, std::size_t width, std::size_t height, std::vector<T> data);

  std::size_t channels() const { return shape_.channels; }
  std::size_t width() const { return shape_.width; }
  std::size_t height() const { return shape_.height; }
  std::size_t plane() const { return shape_.width * shape_.height; }
  std::size_t size() const { return data_.size(); }
  const Shape3& shape() const { return shape_; }

  T& at(std::size_t ch, std::size_t x, std::size_t y) {
    return data_[(ch * shape_.height + y) * shape_.width + x];
  }
  const T& at(std::size_t ch, std::size_t x, std::size_t y) const {
    return data_[(ch * shape_.height + y) * shape_.width + x];
  }

  std::span<T> channel(std::size_t ch) { return {data_.data() + ch * plane(), plane()}; }
  std::span<const T> channel(std::size_t ch) const {
    return {data_.data() + ch * plane(), plane()};
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  // Same element order, new dims. Used by the flatten layer.
  Tensor3 reshaped(Shape3 shape) const;

  bool operator==(const Tensor3&) const = default;

 private:
  Shape3 shape_{};
  std::vector<T> data_;
};

template <class T>
class Tensor4 {
 public:
  Tensor4() = default;
  Tensor4(std::size_t filters, std::size_t channels, std::size_t kh, std::size_t kw)
      : filters_(filters), channels_(channels), kh_(kh), kw_(kw),
        data_(filters * channels * kh * kw, T(0)) {}
  Tensor4(std::size_t filters, std::size_t channels, std::size_t kh, std::size_t kw,
          std::vector<T> data);

  std::size_t filters() const { return filters_; }
  std::size_t channels() const { return channels_; }
  std::size_t kh() const { return kh_; }
  std::size_t kw() const { return kw_; }
  std::size_t size() const { return data_.size(); }
  // Elements per filter (channels * kh * kw).
  std::size_t filter_size() const { return channels_ * kh_ * kw_; }

  T& at(std::size_t i, std::size_t ch, std::size_t r, std::size_t c) {
    return data_[((i * channels_ + ch) * kh_ + r) * kw_ + c];
  }
  const T& at(std::size_t i, std::size_t ch, std::size_t r, std::size_t c) const {
    return data_[((i * channels_ + ch) * kh_ + r) * kw_ + c];
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Tensor4&) const = default;

 private:
  std::size_t filters_ = 0;
  std::size_t channels_ = 0;
  std::size_t kh_ = 0;
  std::size_t kw_ = 0;
  std::vector<T> data_;
};

// Geometry of one convolution. Construct through ConvGeom::make, which
// enforces that the strided window tiles the padded input exactly.
struct ConvGeom {
  std::size_t m = 0;  // input channels
  std::size_t n = 0;  // output channels (filters)
  std::size_t kh = 1;
  std::size_t kw = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;
  std::size_t in_w = 1;
  std::size_t in_h = 1;

  static ConvGeom make(std::size_t m, std::size_t n, std::size_t kh, std::size_t kw,
                       std::size_t stride, std::size_t pad, std::size_t in_w,
                       std::size_t in_h);

  std::size_t out_w() const { return (in_w + 2 * pad - kw) / stride + 1; }
  std::size_t out_h() const { return (in_h + 2 * pad - kh) / stride + 1; }
  std::size_t taps() const { return kh * kw; }
  Shape3 input_shape() const { return {m, in_w, in_h}; }
  Shape3 output_shape() const { return {n, out_w(), out_h()}; }

  bool operator==(const ConvGeom&) const = default;
};

// Operation counters. A multiply-accumulate is one mult plus one add. Bias
// additions and indexed reads of S are tallied separately and are not part
// of flops().
struct OpCount {
  std::uint64_t mults = 0;
  std::uint64_t adds = 0;
  std::uint64_t lookups = 0;
  std::uint64_t bias_adds = 0;
  std::uint64_t bytes_params = 0;

  std::uint64_t flops() const { return mults + adds; }
  OpCount& operator+=(const OpCount& o);
  bool operator==(const OpCount&) const = default;
};

// out[ch, x, y] = t[ch, x - dc, y - dr] where in bounds, else 0.
template <class T>
Tensor3<T> shift2d(const Tensor3<T>& t, std::ptrdiff_t dr, std::ptrdiff_t dc);

// Window read into a (possibly differently sized) output plane:
// out[ch, x, y] = t[ch, x + dc, y + dr] where in bounds, else 0.
template <class T>
Tensor3<T> shift_crop(const Tensor3<T>& t, std::ptrdiff_t dr, std::ptrdiff_t dc,
                      std::size_t out_w, std::size_t out_h);

// Y[i,x,y] = sum_{ch,r,c} X[ch, x*stride + c - pad, y*stride + r - pad] * W[i,ch,r,c] + b[i].
// `bias` may be empty, meaning zero bias.
template <class T>
Tensor3<T> conv2d_dense(const Tensor3<T>& x, const Tensor4<T>& w, std::span<const T> bias,
                        const ConvGeom& geom, OpCount* count = nullptr);

// Stride-1 convolution evaluated as kh*kw separate 1x1 convolutions whose
// results are shifted into place and summed. Bias is not applied.
template <class T>
Tensor3<T> conv2d_as_shifted_sum(const Tensor3<T>& x, const Tensor4<T>& w,
                                 const ConvGeom& geom);

// S[i,x,y] = sum_ch D[i,ch] * X[ch,x,y] for a row-major k x m matrix D.
template <class T>
Tensor3<T> conv1x1_all(const Tensor3<T>& x, std::span<const T> d, std::size_t k,
                       OpCount* count = nullptr);

// 1 x k x kh x kw tensor with a single 1 at (t, r, c).
template <class T>
Tensor4<T> one_hot_kernel(std::size_t t, std::size_t r, std::size_t c, std::size_t k,
                          std::size_t kh, std::size_t kw);

template <class U, class T>
Tensor3<U> cast(const Tensor3<T>& t) {
  return Tensor3<U>(t.channels(), t.width(), t.height(),
                    std::vector<U>(t.data().begin(), t.data().end()));
}

template <class U, class T>
Tensor4<U> cast(const Tensor4<T>& t) {
  return Tensor4<U>(t.filters(), t.channels(), t.kh(), t.kw(),
                    std::vector<U>(t.data().begin(), t.data().end()));
}

template <class T>
bool all_finite(std::span<const T> values);

}  // namespace lcnn
