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

// Sequential models built from lookup-based and dense layers, plus the
// architecture templates used for training and cost reporting.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "lcnn/layer.hpp"

namespace lcnn {

enum class LayerKind : std::uint32_t {
  kLcnnConv = 0,
  kLcnnFc = 1,
  kDenseConv = 2,
  kDenseFc = 3,
  kRelu = 4,
  kMaxPool = 5,
  kGlobalAvgPool = 6,
  kFlatten = 7,
  kSkipSave = 8,  // pushes its input onto the skip stack (identity)
  kSkipAdd = 9,   // pops the skip stack and adds it to its input
};

const char* to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& name);

inline bool is_lcnn(LayerKind k) { return k == LayerKind::kLcnnConv || k == LayerKind::kLcnnFc; }
inline bool is_dense(LayerKind k) {
  return k == LayerKind::kDenseConv || k == LayerKind::kDenseFc;
}
inline bool is_fc(LayerKind k) { return k == LayerKind::kLcnnFc || k == LayerKind::kDenseFc; }
inline bool has_params(LayerKind k) { return is_lcnn(k) || is_dense(k); }

// Max pooling window. Output size uses floor division; padded cells never win.
struct PoolGeom {
  std::size_t kernel = 2;
  std::size_t stride = 2;
  std::size_t pad = 0;

  std::size_t out(std::size_t in) const { return (in + 2 * pad - kernel) / stride + 1; }
  bool operator==(const PoolGeom&) const = default;
};

enum class SparsityMode { kFixedS, kThreshold };

const char* to_string(SparsityMode mode);
SparsityMode sparsity_mode_from_string(const std::string& name);

// Per-layer values fixed at initialization: Gaussian stddev, threshold
// epsilon = c * sigma and l1 weight lambda = lambda' * epsilon.
struct LayerHyper {
  double sigma = 0.0;
  double epsilon = 0.0;
  double lambda = 0.0;

  bool operator==(const LayerHyper&) const = default;
};

template <class T>
struct Layer {
  LayerKind kind = LayerKind::kRelu;
  std::string name;
  std::string block;  // block-type tag ("" when none); drives dictionary sizing
  Shape3 in{};
  Shape3 out{};
  std::optional<LcnnConvLayer<T>> lcnn;
  std::optional<DenseConvLayer<T>> dense;
  PoolGeom pool{};
  LayerHyper hyper{};

  const ConvGeom& geom() const;
  bool operator==(const Layer&) const = default;
};

template <class T>
struct LcnnModel {
  std::string arch;
  Shape3 input{};
  std::size_t num_classes = 0;
  std::vector<Layer<T>> layers;

  // Sparsity settings the model was trained with.
  SparsityMode sparsity = SparsityMode::kThreshold;
  std::size_t s_max = 1;
  double c = 0.01;
  double lambda_prime = 0.1;

  // True when every lookup layer holds (I, C) tables.
  bool inference_mode() const;
  bool training_mode() const;
  std::vector<std::size_t> lcnn_layer_ids() const;
  // Index of a layer by name, or nullopt.
  std::optional<std::size_t> find(const std::string& name) const;

  bool operator==(const LcnnModel&) const = default;
};

template <class U, class T>
LcnnModel<U> cast_model(const LcnnModel<T>& model);

// Converts every lookup layer to (I, C) tables; requires training mode.
template <class T>
void convert_to_inference(LcnnModel<T>& model);
template <class T>
void convert_to_training(LcnnModel<T>& model);

// ---------------------------------------------------------------------------
// Architecture descriptions

struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  std::string name;
  std::size_t out_channels = 0;  // conv filters / fc outputs
  std::size_t kernel = 1;        // conv or pool window
  std::size_t stride = 1;
  std::size_t pad = 0;
  std::string block;
};

struct ArchSpec {
  std::string name;
  Shape3 input{};
  std::size_t num_classes = 0;
  std::vector<LayerSpec> layers;
};

struct ResolvedLayer {
  LayerSpec spec;
  Shape3 in{};
  Shape3 out{};
  std::optional<ConvGeom> geom;  // parameterized layers
  PoolGeom pool{};
};

// Propagates shapes through the architecture, validating every geometry and the
// skip-stack nesting.
std::vector<ResolvedLayer> resolve(const ArchSpec& arch);

// Two lookup conv layers (3x3, 16 and 32 filters, each followed by ReLU and
// 2x2 max pooling) and one fully connected classifier.
ArchSpec toy_cnn(Shape3 input, std::size_t num_classes);

// Small residual-style network: a 3x3 stem, then two block types (8 and 16
// channels) with `blocks_per_type` blocks each, global average pooling and a
// classifier. The first block of each type changes width and has no skip.
ArchSpec toy_resnet(std::size_t blocks_per_type, Shape3 input, std::size_t num_classes);

// AlexNet layer geometry on a 3x227x227 input (no filter groups).
ArchSpec alexnet_template(std::size_t num_classes = 1000);

// ResNet-18 layer geometry on a 3x227x227 input. Spatial sizes are 114 after
// the stem, then 57/29/15/8 per stage so every strided conv tiles exactly.
ArchSpec resnet18_template(std::size_t num_classes = 1000);

// "toy-cnn", "toy-resnet-<B>", "alexnet-template", "resnet18-template".
ArchSpec arch_by_name(const std::string& name, Shape3 input, std::size_t num_classes);

// Explicit comma separated layer list, e.g.
//   "lconv:16:3:1:1,relu,maxpool:2:2,flatten,lfc:10"
// Tokens: lconv/dconv:<n>:<k>[:<stride>[:<pad>]], lfc/dfc:<n>, relu,
// maxpool:<k>[:<stride>[:<pad>]], gap, flatten, skip_save, skip_add.
ArchSpec parse_layer_list(const std::string& text, Shape3 input, std::size_t num_classes);

// Replaces every lookup layer kind by its dense counterpart (and back).
ArchSpec with_dense_layers(ArchSpec arch);

// Dictionary sizing per lookup layer.
struct DictPolicy {
  enum class Kind { kExplicit, kFraction, kTiered };
  Kind kind = Kind::kTiered;
  std::vector<std::size_t> sizes;  // kExplicit, one per lookup layer in order
  double fraction = 0.5;           // kFraction: k = ceil(fraction * n * kh * kw)
  std::size_t first = 3;           // kTiered: first conv layer
  std::size_t base = 16;           // kTiered: untagged convs and block type 0
  std::size_t fc = 512;            // kTiered: fully connected layers
};

// One k per lookup layer of the resolved arch, in order. Tiered sizing gives
// the first conv `first`, block type b (tags "b0", "b1", ...) base * 2^b,
// other convs `base`, and fully connected layers `fc`.
std::vector<std::size_t> dictionary_sizes(const std::vector<ResolvedLayer>& layers,
                                          const DictPolicy& policy);

}  // namespace lcnn
