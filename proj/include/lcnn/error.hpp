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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lcnn {

enum class ErrorKind {
  kDimension,
  kBounds,
  kUnsupportedGeometry,
  kNumeric,
  kMode,
  kStructure,
  kTransfer,
  kContract,
  kFormat,
  kConfig,
  kData,
  kIo,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Raised when the loss or a gradient stops being finite. `layer` is the index
// of the first layer whose output went non-finite, or npos for the loss head.
class NumericFailure : public Error {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  NumericFailure(std::size_t layer, const std::string& what)
      : Error(ErrorKind::kNumeric, what), layer_(layer) {}

  std::size_t layer() const { return layer_; }

 private:
  std::size_t layer_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool ok, ErrorKind kind, const std::string& what) {
  if (!ok) throw Error(kind, what);
}

}  // namespace lcnn
