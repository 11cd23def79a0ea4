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

// Labelled image sets: a synthetic generator and a raw on-disk format.
//
// Raw directory layout:
//   <dir>/labels.txt   one "<sample id> <class id>" pair per line
//   <dir>/<id>.raw     u32 channels, u32 width, u32 height (little-endian),
//                      then channels*width*height bytes, channel-major
// Pixels load as value / 255.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lcnn/training.hpp"

namespace lcnn {

struct Dataset {
  Shape3 shape{};
  std::size_t num_classes = 0;
  std::vector<Sample<float>> samples;
};

// Each class is a fixed texture of Gaussian blobs and an oriented stripe
// pattern derived from (seed, class id) alone, so class k looks the same no
// matter which class range is generated. Samples add a random shift, contrast
// change and pixel noise, then clip to [0, 1] and quantize to 8 bits.
// `separation` blends each class texture with one texture shared by all
// classes (1 = fully distinct, 0 = identical classes).
struct SyntheticSpec {
  Shape3 shape{3, 32, 32};
  std::size_t classes = 10;
  std::size_t first_class = 0;  // classes first_class .. first_class+classes-1, labelled from 0
  std::size_t per_class = 100;
  std::uint64_t seed = 1;         // class textures
  std::uint64_t sample_seed = 2;  // per-sample variation
  double noise = 0.15;
  double separation = 1.0;
  std::size_t max_shift = 3;
};

Dataset make_synthetic(const SyntheticSpec& spec);

Dataset load_raw_dir(const std::string& dir);
void save_raw_dir(const Dataset& data, const std::string& dir);

}  // namespace lcnn
