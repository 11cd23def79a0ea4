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

#include "lcnn/model.hpp"

#include <cmath>
#include <sstream>

namespace lcnn {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kLcnnConv: return "lconv";
    case LayerKind::kLcnnFc: return "lfc";
    case LayerKind::kDenseConv: return "dconv";
    case LayerKind::kDenseFc: return "dfc";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kMaxPool: return "maxpool";
    case LayerKind::kGlobalAvgPool: return "gap";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kSkipSave: return "skip_save";
    case LayerKind::kSkipAdd: return "skip_add";
  }
  return "?";
}

LayerKind layer_kind_from_string(const std::string& name) {
  for (std::uint32_t k = 0; k <= static_cast<std::uint32_t>(LayerKind::kSkipAdd); ++k) {
    const auto kind = static_cast<LayerKind>(k);
    if (name == to_string(kind)) return kind;
  }
  fail(ErrorKind::kConfig, "unknown layer kind '" + name + "'");
}

const char* to_string(SparsityMode mode) {
  return mode == SparsityMode::kFixedS ? "fixed_s" : "threshold";
}

SparsityMode sparsity_mode_from_string(const std::string& name) {
  if (name == "fixed_s") return SparsityMode::kFixedS;
  if (name == "threshold") return SparsityMode::kThreshold;
  fail(ErrorKind::kConfig, "unknown sparsity mode '" + name + "'");
}

template <class T>
const ConvGeom& Layer<T>::geom() const {
  if (lcnn) return lcnn->geom;
  require(dense.has_value(), ErrorKind::kStructure, "layer '" + name + "' has no geometry");
  return dense->geom;
}

template <class T>
bool LcnnModel<T>::inference_mode() const {
  for (const auto& l : layers)
    if (l.lcnn && l.lcnn->mode() != LayerMode::kInference) return false;
  return true;
}

template <class T>
bool LcnnModel<T>::training_mode() const {
  for (const auto& l : layers)
    if (l.lcnn && l.lcnn->mode() != LayerMode::kTraining) return false;
  return true;
}

template <class T>
std::vector<std::size_t> LcnnModel<T>::lcnn_layer_ids() const {
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].lcnn) ids.push_back(i);
  return ids;
}

template <class T>
std::optional<std::size_t> LcnnModel<T>::find(const std::string& name) const {
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].name == name) return i;
  return std::nullopt;
}

namespace {

template <class U, class T>
std::vector<U> cast_vec(const std::vector<T>& v) {
  return std::vector<U>(v.begin(), v.end());
}

template <class U, class T>
LcnnConvLayer<U> cast_lcnn(const LcnnConvLayer<T>& l) {
  Dictionary<U> dict(l.dict.k, l.dict.m, cast_vec<U>(l.dict.data), l.dict.frozen);
  std::variant<SparseCombiner<U>, LookupTables<U>> repr;
  if (l.mode() == LayerMode::kTraining) {
    const auto& comb = l.combiner();
    SparseCombiner<U> out(cast<U>(comb.p));
    out.frozen_zero = comb.frozen_zero;
    out.s_max = comb.s_max;
    repr = std::move(out);
  } else {
    const auto& t = l.tables();
    repr = LookupTables<U>::from_raw(t.n(), t.kh(), t.kw(), l.dict.k, t.offsets(),
                                     t.all_indices(), cast_vec<U>(t.all_coeffs()));
  }
  return LcnnConvLayer<U>{l.geom, std::move(dict), std::move(repr), cast_vec<U>(l.bias)};
}

}  // namespace

template <class U, class T>
LcnnModel<U> cast_model(const LcnnModel<T>& model) {
  LcnnModel<U> out;
  out.arch = model.arch;
  out.input = model.input;
  out.num_classes = model.num_classes;
  out.sparsity = model.sparsity;
  out.s_max = model.s_max;
  out.c = model.c;
  out.lambda_prime = model.lambda_prime;
  for (const auto& l : model.layers) {
    Layer<U> nl;
    nl.kind = l.kind;
    nl.name = l.name;
    nl.block = l.block;
    nl.in = l.in;
    nl.out = l.out;
    nl.pool = l.pool;
    nl.hyper = l.hyper;
    if (l.lcnn) nl.lcnn = cast_lcnn<U>(*l.lcnn);
    if (l.dense)
      nl.dense = DenseConvLayer<U>{l.dense->geom, cast<U>(l.dense->w), cast_vec<U>(l.dense->bias)};
    out.layers.push_back(std::move(nl));
  }
  return out;
}

template <class T>
void convert_to_inference(LcnnModel<T>& model) {
  require(model.training_mode(), ErrorKind::kMode, "model is already in inference mode");
  for (auto& l : model.layers)
    if (l.lcnn) to_inference(*l.lcnn);
}

template <class T>
void convert_to_training(LcnnModel<T>& model) {
  for (auto& l : model.layers)
    if (l.lcnn) to_training(*l.lcnn);
}

// ---------------------------------------------------------------------------
// Architectures

std::vector<ResolvedLayer> resolve(const ArchSpec& arch) {
  require(arch.input.size() > 0, ErrorKind::kDimension, "architecture input shape is empty");
  std::vector<ResolvedLayer> out;
  std::vector<Shape3> skips;
  Shape3 cur = arch.input;
  for (const LayerSpec& spec : arch.layers) {
    ResolvedLayer rl;
    rl.spec = spec;
    rl.in = cur;
    const std::string where = "layer '" + spec.name + "': ";
    switch (spec.kind) {
      case LayerKind::kLcnnConv:
      case LayerKind::kDenseConv:
        rl.geom = ConvGeom::make(cur.channels, spec.out_channels, spec.kernel, spec.kernel,
                                 spec.stride, spec.pad, cur.width, cur.height);
        rl.out = rl.geom->output_shape();
        break;
      case LayerKind::kLcnnFc:
      case LayerKind::kDenseFc:
        require(cur.width == 1 && cur.height == 1, ErrorKind::kDimension,
                where + "fully connected input must be flattened, got " + to_string(cur));
        rl.geom = fc_as_conv(cur.channels, spec.out_channels);
        rl.out = rl.geom->output_shape();
        break;
      case LayerKind::kRelu:
        rl.out = cur;
        break;
      case LayerKind::kMaxPool:
        rl.pool = PoolGeom{spec.kernel, spec.stride, spec.pad};
        require(spec.kernel >= 1 && spec.stride >= 1 && spec.pad < spec.kernel &&
                    cur.width + 2 * spec.pad >= spec.kernel &&
                    cur.height + 2 * spec.pad >= spec.kernel,
                ErrorKind::kDimension, where + "pool window does not fit input");
        rl.out = {cur.channels, rl.pool.out(cur.width), rl.pool.out(cur.height)};
        break;
      case LayerKind::kGlobalAvgPool:
        rl.out = {cur.channels, 1, 1};
        break;
      case LayerKind::kFlatten:
        rl.out = {cur.size(), 1, 1};
        break;
      case LayerKind::kSkipSave:
        skips.push_back(cur);
        rl.out = cur;
        break;
      case LayerKind::kSkipAdd:
        require(!skips.empty(), ErrorKind::kStructure, where + "skip_add without skip_save");
        require(skips.back() == cur, ErrorKind::kDimension,
                where + "skip shapes differ: " + to_string(skips.back()) + " vs " +
                    to_string(cur));
        skips.pop_back();
        rl.out = cur;
        break;
    }
    cur = rl.out;
    out.push_back(std::move(rl));
  }
  require(skips.empty(), ErrorKind::kStructure, "unterminated skip_save");
  require(cur == Shape3{arch.num_classes, 1, 1}, ErrorKind::kDimension,
          "architecture output " + to_string(cur) + " does not match " +
              std::to_string(arch.num_classes) + " classes");
  return out;
}

namespace {

LayerSpec conv(LayerKind kind, std::string name, std::size_t n, std::size_t k,
               std::size_t stride, std::size_t pad, std::string block = "") {
  return LayerSpec{kind, std::move(name), n, k, stride, pad, std::move(block)};
}

LayerSpec simple(LayerKind kind, std::string name) {
  return LayerSpec{kind, std::move(name), 0, 1, 1, 0, ""};
}

LayerSpec pool(std::string name, std::size_t k, std::size_t stride, std::size_t pad = 0) {
  return LayerSpec{LayerKind::kMaxPool, std::move(name), 0, k, stride, pad, ""};
}

LayerSpec fc(std::string name, std::size_t n) {
  return LayerSpec{LayerKind::kLcnnFc, std::move(name), n, 1, 1, 0, ""};
}

}  // namespace

ArchSpec toy_cnn(Shape3 input, std::size_t num_classes) {
  ArchSpec a{"toy-cnn", input, num_classes, {}};
  a.layers = {
      conv(LayerKind::kLcnnConv, "conv1", 16, 3, 1, 1),
      simple(LayerKind::kRelu, "relu1"),
      pool("pool1", 2, 2),
      conv(LayerKind::kLcnnConv, "conv2", 32, 3, 1, 1),
      simple(LayerKind::kRelu, "relu2"),
      pool("pool2", 2, 2),
      simple(LayerKind::kFlatten, "flatten"),
      fc("fc", num_classes),
  };
  return a;
}

ArchSpec toy_resnet(std::size_t blocks_per_type, Shape3 input, std::size_t num_classes) {
  require(blocks_per_type >= 1, ErrorKind::kConfig, "toy-resnet needs at least one block");
  ArchSpec a{"toy-resnet-" + std::to_string(blocks_per_type), input, num_classes, {}};
  a.layers.push_back(conv(LayerKind::kLcnnConv, "stem", 8, 3, 1, 1));
  a.layers.push_back(simple(LayerKind::kRelu, "stem.relu"));
  const std::size_t widths[2] = {8, 16};
  for (std::size_t t = 0; t < 2; ++t) {
    const std::string tag = "b" + std::to_string(t);
    if (t > 0) a.layers.push_back(pool("t" + std::to_string(t) + ".pool", 2, 2));
    for (std::size_t b = 0; b < blocks_per_type; ++b) {
      const std::string p = "t" + std::to_string(t) + ".b" + std::to_string(b);
      if (b > 0) a.layers.push_back(simple(LayerKind::kSkipSave, p + ".save"));
      a.layers.push_back(conv(LayerKind::kLcnnConv, p + ".c1", widths[t], 3, 1, 1, tag));
      a.layers.push_back(simple(LayerKind::kRelu, p + ".relu1"));
      a.layers.push_back(conv(LayerKind::kLcnnConv, p + ".c2", widths[t], 3, 1, 1, tag));
      if (b > 0) a.layers.push_back(simple(LayerKind::kSkipAdd, p + ".add"));
      a.layers.push_back(simple(LayerKind::kRelu, p + ".relu2"));
    }
  }
  a.layers.push_back(simple(LayerKind::kGlobalAvgPool, "gap"));
  a.layers.push_back(simple(LayerKind::kFlatten, "flatten"));
  a.layers.push_back(fc("fc", num_classes));
  return a;
}

ArchSpec alexnet_template(std::size_t num_classes) {
  ArchSpec a{"alexnet-template", {3, 227, 227}, num_classes, {}};
  a.layers = {
      conv(LayerKind::kLcnnConv, "conv1", 96, 11, 4, 0),
      simple(LayerKind::kRelu, "relu1"),
      pool("pool1", 3, 2),
      conv(LayerKind::kLcnnConv, "conv2", 256, 5, 1, 2),
      simple(LayerKind::kRelu, "relu2"),
      pool("pool2", 3, 2),
      conv(LayerKind::kLcnnConv, "conv3", 384, 3, 1, 1),
      simple(LayerKind::kRelu, "relu3"),
      conv(LayerKind::kLcnnConv, "conv4", 384, 3, 1, 1),
      simple(LayerKind::kRelu, "relu4"),
      conv(LayerKind::kLcnnConv, "conv5", 256, 3, 1, 1),
      simple(LayerKind::kRelu, "relu5"),
      pool("pool5", 3, 2),
      simple(LayerKind::kFlatten, "flatten"),
      fc("fc6", 4096),
      simple(LayerKind::kRelu, "relu6"),
      fc("fc7", 4096),
      simple(LayerKind::kRelu, "relu7"),
      fc("fc8", num_classes),
  };
  return a;
}

ArchSpec resnet18_template(std::size_t num_classes) {
  ArchSpec a{"resnet18-template", {3, 227, 227}, num_classes, {}};
  a.layers.push_back(conv(LayerKind::kLcnnConv, "conv1", 64, 7, 2, 3));
  a.layers.push_back(simple(LayerKind::kRelu, "relu1"));
  a.layers.push_back(pool("pool1", 3, 2, 1));
  const std::size_t widths[4] = {64, 128, 256, 512};
  for (std::size_t t = 0; t < 4; ++t) {
    const std::string tag = "b" + std::to_string(t);
    for (std::size_t b = 0; b < 2; ++b) {
      const std::string p = "layer" + std::to_string(t + 1) + "." + std::to_string(b);
      const bool downsample = t > 0 && b == 0;
      if (!downsample) a.layers.push_back(simple(LayerKind::kSkipSave, p + ".save"));
      a.layers.push_back(
          conv(LayerKind::kLcnnConv, p + ".conv1", widths[t], 3, downsample ? 2 : 1, 1, tag));
      a.layers.push_back(simple(LayerKind::kRelu, p + ".relu1"));
      a.layers.push_back(conv(LayerKind::kLcnnConv, p + ".conv2", widths[t], 3, 1, 1, tag));
      if (!downsample) a.layers.push_back(simple(LayerKind::kSkipAdd, p + ".add"));
      a.layers.push_back(simple(LayerKind::kRelu, p + ".relu2"));
    }
  }
  a.layers.push_back(simple(LayerKind::kGlobalAvgPool, "gap"));
  a.layers.push_back(simple(LayerKind::kFlatten, "flatten"));
  a.layers.push_back(fc("fc", num_classes));
  return a;
}

ArchSpec arch_by_name(const std::string& name, Shape3 input, std::size_t num_classes) {
  if (name == "toy-cnn") return toy_cnn(input, num_classes);
  if (name == "alexnet-template") return alexnet_template(num_classes);
  if (name == "resnet18-template") return resnet18_template(num_classes);
  const std::string prefix = "toy-resnet-";
  if (name.rfind(prefix, 0) == 0) {
    const std::string digits = name.substr(prefix.size());
    require(!digits.empty() && digits.find_first_not_of("0123456789") == std::string::npos,
            ErrorKind::kConfig, "bad toy-resnet block count in '" + name + "'");
    return toy_resnet(std::stoul(digits), input, num_classes);
  }
  fail(ErrorKind::kConfig, "unknown architecture '" + name + "'");
}

ArchSpec parse_layer_list(const std::string& text, Shape3 input, std::size_t num_classes) {
  ArchSpec a{"custom", input, num_classes, {}};
  std::stringstream ss(text);
  std::string token;
  std::size_t counter = 0;
  while (std::getline(ss, token, ',')) {
    std::vector<std::string> parts;
    std::stringstream ts(token);
    std::string part;
    while (std::getline(ts, part, ':')) {
      const auto b = part.find_first_not_of(" \t");
      const auto e = part.find_last_not_of(" \t");
      parts.push_back(b == std::string::npos ? "" : part.substr(b, e - b + 1));
    }
    require(!parts.empty() && !parts[0].empty(), ErrorKind::kConfig,
            "empty layer token in layer list");
    auto num = [&](std::size_t i, std::size_t fallback) -> std::size_t {
      if (i >= parts.size()) return fallback;
      require(!parts[i].empty() && parts[i].find_first_not_of("0123456789") == std::string::npos,
              ErrorKind::kConfig, "bad number in layer token '" + token + "'");
      return std::stoul(parts[i]);
    };
    const LayerKind kind = layer_kind_from_string(parts[0]);
    const std::string name = parts[0] + std::to_string(counter++);
    switch (kind) {
      case LayerKind::kLcnnConv:
      case LayerKind::kDenseConv:
        require(parts.size() >= 3, ErrorKind::kConfig, "conv token needs <n>:<k> in '" + token + "'");
        a.layers.push_back(conv(kind, name, num(1, 0), num(2, 1), num(3, 1), num(4, 0)));
        break;
      case LayerKind::kLcnnFc:
      case LayerKind::kDenseFc:
        require(parts.size() >= 2, ErrorKind::kConfig, "fc token needs <n> in '" + token + "'");
        a.layers.push_back(LayerSpec{kind, name, num(1, 0), 1, 1, 0, ""});
        break;
      case LayerKind::kMaxPool:
        a.layers.push_back(pool(name, num(1, 2), num(2, num(1, 2)), num(3, 0)));
        break;
      default:
        a.layers.push_back(simple(kind, name));
    }
  }
  return a;
}

ArchSpec with_dense_layers(ArchSpec arch) {
  for (auto& l : arch.layers) {
    if (l.kind == LayerKind::kLcnnConv) l.kind = LayerKind::kDenseConv;
    if (l.kind == LayerKind::kLcnnFc) l.kind = LayerKind::kDenseFc;
  }
  return arch;
}

std::vector<std::size_t> dictionary_sizes(const std::vector<ResolvedLayer>& layers,
                                          const DictPolicy& policy) {
  std::vector<std::size_t> ks;
  bool first_conv = true;
  for (const auto& rl : layers) {
    if (!is_lcnn(rl.spec.kind)) {
      if (is_dense(rl.spec.kind) && !is_fc(rl.spec.kind)) first_conv = false;
      continue;
    }
    const ConvGeom& g = *rl.geom;
    std::size_t k = 0;
    switch (policy.kind) {
      case DictPolicy::Kind::kExplicit:
        require(ks.size() < policy.sizes.size(), ErrorKind::kConfig,
                "dictionary size list shorter than the number of lookup layers");
        k = policy.sizes[ks.size()];
        break;
      case DictPolicy::Kind::kFraction:
        k = static_cast<std::size_t>(
            std::ceil(policy.fraction * static_cast<double>(g.n * g.kh * g.kw) - 1e-9));
        break;
      case DictPolicy::Kind::kTiered:
        if (is_fc(rl.spec.kind)) {
          k = policy.fc;
        } else if (first_conv) {
          k = policy.first;
        } else if (rl.spec.block.size() > 1 && rl.spec.block[0] == 'b') {
          k = policy.base << std::stoul(rl.spec.block.substr(1));
        } else {
          k = policy.base;
        }
        break;
    }
    require(k >= 1, ErrorKind::kConfig, "dictionary size must be positive for layer '" +
                                            rl.spec.name + "'");
    if (!is_fc(rl.spec.kind)) first_conv = false;
    ks.push_back(k);
  }
  if (policy.kind == DictPolicy::Kind::kExplicit)
    require(ks.size() == policy.sizes.size(), ErrorKind::kConfig,
            "dictionary size list has " + std::to_string(policy.sizes.size()) +
                " entries for " + std::to_string(ks.size()) + " lookup layers");
  return ks;
}

template struct Layer<float>;
template struct Layer<double>;
template struct LcnnModel<float>;
template struct LcnnModel<double>;
template LcnnModel<double> cast_model<double, float>(const LcnnModel<float>&);
template LcnnModel<float> cast_model<float, double>(const LcnnModel<double>&);
template LcnnModel<float> cast_model<float, float>(const LcnnModel<float>&);
template void convert_to_inference(LcnnModel<float>&);
template void convert_to_inference(LcnnModel<double>&);
template void convert_to_training(LcnnModel<float>&);
template void convert_to_training(LcnnModel<double>&);

}  // namespace lcnn
