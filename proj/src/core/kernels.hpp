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

// Internal dense kernels shared by the convolution paths. All loops run in a
// fixed order so results are bitwise reproducible.

#include <cstddef>
#include <vector>

#include "lcnn/tensor.hpp"

namespace lcnn::detail {

// C[M x N] += A[M x K] * B[K x N], all row-major and contiguous.
template <class T>
void gemm_nn(std::size_t M, std::size_t N, std::size_t K, const T* __restrict a,
             const T* __restrict b, T* __restrict c) {
  for (std::size_t i = 0; i < M; ++i) {
    T* __restrict crow = c + i * N;
    const T* arow = a + i * K;
    for (std::size_t p = 0; p < K; ++p) {
      const T av = arow[p];
      const T* __restrict brow = b + p * N;
      for (std::size_t j = 0; j < N; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[M x N] += A^T * B where A is K x M and B is K x N.
template <class T>
void gemm_tn(std::size_t M, std::size_t N, std::size_t K, const T* __restrict a,
             const T* __restrict b, T* __restrict c) {
  for (std::size_t p = 0; p < K; ++p) {
    const T* arow = a + p * M;
    const T* __restrict brow = b + p * N;
    for (std::size_t i = 0; i < M; ++i) {
      const T av = arow[i];
      T* __restrict crow = c + i * N;
      for (std::size_t j = 0; j < N; ++j) crow[j] += av * brow[j];
    }
  }
}

template <class T>
std::vector<T> transpose(const T* a, std::size_t rows, std::size_t cols) {
  std::vector<T> out(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = a[i * cols + j];
  return out;
}

// Unfolds the zero-padded input into a (m*kh*kw) x (out_w*out_h) matrix.
// Row (ch*kh + r)*kw + c, column y'*out_w + x'.
template <class T>
std::vector<T> im2col(const Tensor3<T>& x, const ConvGeom& g) {
  const std::size_t ow = g.out_w(), oh = g.out_h();
  const std::size_t cols = ow * oh;
  std::vector<T> out(g.m * g.kh * g.kw * cols, T(0));
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  const auto w = static_cast<std::ptrdiff_t>(g.in_w);
  const auto h = static_cast<std::ptrdiff_t>(g.in_h);
  for (std::size_t ch = 0; ch < g.m; ++ch) {
    for (std::size_t r = 0; r < g.kh; ++r) {
      for (std::size_t c = 0; c < g.kw; ++c) {
        T* row = out.data() + ((ch * g.kh + r) * g.kw + c) * cols;
        for (std::size_t yo = 0; yo < oh; ++yo) {
          const std::ptrdiff_t yi =
              static_cast<std::ptrdiff_t>(yo * g.stride + r) - pad;
          if (yi < 0 || yi >= h) continue;
          for (std::size_t xo = 0; xo < ow; ++xo) {
            const std::ptrdiff_t xi =
                static_cast<std::ptrdiff_t>(xo * g.stride + c) - pad;
            if (xi < 0 || xi >= w) continue;
            row[yo * ow + xo] = x.at(ch, static_cast<std::size_t>(xi),
                                     static_cast<std::size_t>(yi));
          }
        }
      }
    }
  }
  return out;
}

// Adjoint of im2col: scatters-adds a column matrix back onto the input grid.
template <class T>
Tensor3<T> col2im(const std::vector<T>& colmat, const ConvGeom& g) {
  Tensor3<T> x(g.m, g.in_w, g.in_h);
  const std::size_t ow = g.out_w(), oh = g.out_h();
  const std::size_t cols = ow * oh;
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  const auto w = static_cast<std::ptrdiff_t>(g.in_w);
  const auto h = static_cast<std::ptrdiff_t>(g.in_h);
  for (std::size_t ch = 0; ch < g.m; ++ch) {
    for (std::size_t r = 0; r < g.kh; ++r) {
      for (std::size_t c = 0; c < g.kw; ++c) {
        const T* row = colmat.data() + ((ch * g.kh + r) * g.kw + c) * cols;
        for (std::size_t yo = 0; yo < oh; ++yo) {
          const std::ptrdiff_t yi =
              static_cast<std::ptrdiff_t>(yo * g.stride + r) - pad;
          if (yi < 0 || yi >= h) continue;
          for (std::size_t xo = 0; xo < ow; ++xo) {
            const std::ptrdiff_t xi =
                static_cast<std::ptrdiff_t>(xo * g.stride + c) - pad;
            if (xi < 0 || xi >= w) continue;
            x.at(ch, static_cast<std::size_t>(xi), static_cast<std::size_t>(yi)) +=
                row[yo * ow + xo];
          }
        }
      }
    }
  }
  return x;
}

// Copies x into a zero border of `pad` on every side.
template <class T>
Tensor3<T> zero_pad(const Tensor3<T>& x, std::size_t pad) {
  if (pad == 0) return x;
  Tensor3<T> out(x.channels(), x.width() + 2 * pad, x.height() + 2 * pad);
  for (std::size_t ch = 0; ch < x.channels(); ++ch)
    for (std::size_t y = 0; y < x.height(); ++y)
      for (std::size_t xx = 0; xx < x.width(); ++xx)
        out.at(ch, xx + pad, y + pad) = x.at(ch, xx, y);
  return out;
}

}  // namespace lcnn::detail
