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

#include "lcnn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "lcnn/serialize.hpp"

namespace lcnn {

namespace {

struct Blob {
  double cx, cy, sigma;
  std::vector<double> amp;  // per channel
};

struct Texture {
  std::vector<double> base;
  std::vector<Blob> blobs;
  double freq_x = 0.0, freq_y = 0.0, phase = 0.0;
  std::vector<double> stripe;  // per channel amplitude

  double value(std::size_t ch, double x, double y) const {
    double v = base[ch];
    for (const Blob& b : blobs) {
      const double dx = x - b.cx, dy = y - b.cy;
      v += b.amp[ch] * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
    }
    v += stripe[ch] * std::sin(2.0 * std::numbers::pi * (freq_x * x + freq_y * y) + phase);
    return v;
  }
};

Rng seeded(std::initializer_list<std::uint64_t> parts) {
  std::vector<std::uint32_t> words;
  for (const auto p : parts) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

Texture make_texture(const Shape3& shape, std::uint64_t seed, std::size_t cls) {
  Rng rng = seeded({seed, cls, 0x7e47u});
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double w = double(shape.width), h = double(shape.height);
  Texture t;
  for (std::size_t ch = 0; ch < shape.channels; ++ch) t.base.push_back(0.25 + 0.25 * u(rng));
  for (int b = 0; b < 3; ++b) {
    Blob blob{w * (0.2 + 0.6 * u(rng)), h * (0.2 + 0.6 * u(rng)),
              std::min(w, h) * (0.08 + 0.12 * u(rng)), {}};
    for (std::size_t ch = 0; ch < shape.channels; ++ch) blob.amp.push_back(-0.4 + u(rng));
    t.blobs.push_back(std::move(blob));
  }
  const double angle = std::numbers::pi * u(rng);
  const double cycles = 1.0 + 3.0 * u(rng);
  t.freq_x = cycles * std::cos(angle) / w;
  t.freq_y = cycles * std::sin(angle) / h;
  t.phase = 2.0 * std::numbers::pi * u(rng);
  for (std::size_t ch = 0; ch < shape.channels; ++ch) t.stripe.push_back(0.2 * u(rng));
  return t;
}

}  // namespace

Dataset make_synthetic(const SyntheticSpec& spec) {
  require(spec.classes >= 1 && spec.per_class >= 1 && spec.shape.size() > 0, ErrorKind::kConfig,
          "synthetic dataset needs classes, samples and a shape");
  Dataset d;
  d.shape = spec.shape;
  d.num_classes = spec.classes;
  require(spec.separation >= 0.0 && spec.separation <= 1.0, ErrorKind::kConfig,
          "synthetic separation must be in [0, 1]");
  const Texture shared = make_texture(spec.shape, spec.seed, ~std::uint64_t{0});
  std::vector<Texture> textures;
  for (std::size_t c = 0; c < spec.classes; ++c)
    textures.push_back(make_texture(spec.shape, spec.seed, spec.first_class + c));
  const double a = spec.separation;
  const auto shift_span = static_cast<int>(spec.max_shift);
  for (std::size_t i = 0; i < spec.per_class; ++i) {
    for (std::size_t c = 0; c < spec.classes; ++c) {
      const std::size_t cls = spec.first_class + c;
      Rng rng = seeded({spec.sample_seed, cls, i});
      std::uniform_int_distribution<int> shift(-shift_span, shift_span);
      std::uniform_real_distribution<double> contrast(0.8, 1.2);
      std::normal_distribution<double> noise(0.0, spec.noise);
      const double dx = shift(rng), dy = shift(rng), k = contrast(rng);
      Sample<float> s{Tensor3<float>(spec.shape), c};
      for (std::size_t ch = 0; ch < spec.shape.channels; ++ch) {
        for (std::size_t y = 0; y < spec.shape.height; ++y) {
          for (std::size_t x = 0; x < spec.shape.width; ++x) {
            const double px = double(x) - dx, py = double(y) - dy;
            const double t = a * textures[c].value(ch, px, py) + (1.0 - a) * shared.value(ch, px, py);
            double v = 0.5 + k * (t - 0.5);
            v = std::clamp(v + noise(rng), 0.0, 1.0);
            s.x.at(ch, x, y) = static_cast<float>(std::round(v * 255.0)) / 255.0f;
          }
        }
      }
      d.samples.push_back(std::move(s));
    }
  }
  return d;
}

Dataset load_raw_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  std::ifstream labels(root / "labels.txt");
  require(labels.good(), ErrorKind::kData, "cannot open '" + (root / "labels.txt").string() + "'");
  Dataset d;
  std::vector<std::size_t> seen;
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  while (std::getline(labels, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::string id;
    long long cls = -1;
    require(static_cast<bool>(ls >> id >> cls) && cls >= 0, ErrorKind::kData,
            "labels.txt line " + std::to_string(lineno) + " must be '<id> <class>'");
    std::vector<std::uint8_t> bytes;
    try {
      bytes = read_file((root / (id + ".raw")).string());
    } catch (const Error& e) {
      fail(ErrorKind::kData, e.what());
    }
    require(bytes.size() >= 12, ErrorKind::kData, "sample '" + id + "' is too short");
    auto u32 = [&](std::size_t off) {
      return std::uint32_t(bytes[off]) | std::uint32_t(bytes[off + 1]) << 8 |
             std::uint32_t(bytes[off + 2]) << 16 | std::uint32_t(bytes[off + 3]) << 24;
    };
    const Shape3 shape{u32(0), u32(4), u32(8)};
    require(shape.size() > 0 && bytes.size() == 12 + shape.size(), ErrorKind::kData,
            "sample '" + id + "' size does not match its dims");
    if (first) {
      d.shape = shape;
      first = false;
    }
    require(shape == d.shape, ErrorKind::kData,
            "sample '" + id + "' has dims " + to_string(shape) + ", expected " + to_string(d.shape));
    Sample<float> s{Tensor3<float>(shape), static_cast<std::size_t>(cls)};
    for (std::size_t e = 0; e < shape.size(); ++e) s.x.data()[e] = float(bytes[12 + e]) / 255.0f;
    if (s.label >= seen.size()) seen.resize(s.label + 1, 0);
    ++seen[s.label];
    d.samples.push_back(std::move(s));
  }
  require(!d.samples.empty(), ErrorKind::kData, "dataset '" + dir + "' is empty");
  for (std::size_t c = 0; c < seen.size(); ++c)
    require(seen[c] > 0, ErrorKind::kData,
            "class ids must be dense: class " + std::to_string(c) + " has no samples");
  d.num_classes = seen.size();
  return d;
}

void save_raw_dir(const Dataset& data, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream labels(fs::path(dir) / "labels.txt", std::ios::trunc);
  require(labels.good(), ErrorKind::kIo, "cannot write labels in '" + dir + "'");
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const auto& s = data.samples[i];
    char id[32];
    std::snprintf(id, sizeof id, "s%06zu", i);
    std::vector<std::uint8_t> bytes;
    for (const std::uint32_t v : {std::uint32_t(s.x.channels()), std::uint32_t(s.x.width()),
                                  std::uint32_t(s.x.height())})
      for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
    for (const float v : s.x.data())
      bytes.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
    write_file((fs::path(dir) / (std::string(id) + ".raw")).string(), bytes);
    labels << id << ' ' << s.label << '\n';
  }
}

}  // namespace lcnn
