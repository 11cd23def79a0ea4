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

// Binary model file.
//
//   "LCNNMDL1"                      8-byte magic
//   u32 n, n bytes                  UTF-8 JSON header (format version,
//                                   architecture, per-layer geometry, k,
//                                   mode, frozen flags, hyperparameters)
//   per layer: u32 kind, u64 n, n bytes of chunk body
//   u32                             CRC-32 of every byte between the magic
//                                   and the checksum
//
// All integers and reals are little-endian; reals are 32-bit. Lookup chunk
// bodies hold the dictionary (row-major) and bias, then either
//   training form   P values, a nonzero bitset and a pinned-zero bitset
//   inference form  one LEB128 list length per (filter, tap), then all
//                   indices (u32), then all coefficients

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lcnn/model.hpp"

namespace lcnn {

inline constexpr std::uint32_t kModelFormatVersion = 1;

std::vector<std::uint8_t> serialize_model(const LcnnModel<float>& model);
LcnnModel<float> deserialize_model(std::span<const std::uint8_t> bytes);

void save_model(const LcnnModel<float>& model, const std::string& path);
LcnnModel<float> load_model(const std::string& path);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace lcnn
