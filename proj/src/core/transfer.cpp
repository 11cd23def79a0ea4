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

#include "lcnn/transfer.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

namespace lcnn {

namespace {

std::string describe(const LcnnModel<float>& model, std::size_t id) {
  if (id >= model.layers.size()) return "#" + std::to_string(id);
  const auto& l = model.layers[id];
  std::string s = "'" + l.name + "'";
  if (l.lcnn)
    s += " (m=" + std::to_string(l.lcnn->dict.m) + ", k=" + std::to_string(l.lcnn->dict.k) + ")";
  return s;
}

// Empty string when the pair is compatible.
std::string mismatch(const LcnnModel<float>& src, const LcnnModel<float>& dst, std::size_t s,
                     std::size_t d) {
  if (s >= src.layers.size() || !src.layers[s].lcnn) return "source is not a lookup layer";
  if (d >= dst.layers.size() || !dst.layers[d].lcnn) return "destination is not a lookup layer";
  const auto& sd = src.layers[s].lcnn->dict;
  const auto& dl = *dst.layers[d].lcnn;
  if (sd.m != dl.geom.m) return "input channel sizes differ";
  if (sd.k != dl.dict.k) return "dictionary sizes differ";
  return {};
}

}  // namespace

LcnnModel<float> transfer_dictionaries(const LcnnModel<float>& src, const LcnnModel<float>& dst,
                                       const TransferPlan& plan, TransferReport* report) {
  std::set<std::size_t> seen;
  for (const auto& [s, d] : plan.mapping)
    require(seen.insert(d).second, ErrorKind::kTransfer,
            "destination layer " + describe(dst, d) + " appears more than once in the plan");
  LcnnModel<float> out = dst;
  TransferReport rep;
  for (const auto& [s, d] : plan.mapping) {
    const std::string why = mismatch(src, dst, s, d);
    if (!why.empty()) {
      const std::string msg = "transfer " + describe(src, s) + " -> " + describe(dst, d) + ": " + why;
      if (plan.strict) fail(ErrorKind::kTransfer, msg);
      rep.skipped.push_back(msg);
      continue;
    }
    Dictionary<float>& target = out.layers[d].lcnn->dict;
    const bool was_frozen = target.frozen;
    target = src.layers[s].lcnn->dict;
    target.frozen = plan.freeze_after_transfer ? true : was_frozen;
    rep.applied.emplace_back(s, d);
  }
  if (report) *report = std::move(rep);
  return out;
}

TransferPlan auto_transfer_plan(const LcnnModel<float>& src, const LcnnModel<float>& dst) {
  TransferPlan plan;
  for (std::size_t d = 0; d < dst.layers.size(); ++d) {
    const auto& dl = dst.layers[d];
    if (!dl.lcnn) continue;
    std::optional<std::size_t> match;
    if (auto s = src.find(dl.name); s && src.layers[*s].lcnn && mismatch(src, dst, *s, d).empty())
      match = s;
    for (std::size_t s = 0; !match && s < src.layers.size(); ++s) {
      const auto& sl = src.layers[s];
      if (sl.lcnn && sl.block == dl.block && mismatch(src, dst, s, d).empty()) match = s;
    }
    if (match) plan.mapping.emplace_back(*match, d);
  }
  return plan;
}

TransferPlan parse_transfer_plan(const std::string& text, const LcnnModel<float>& src,
                                 const LcnnModel<float>& dst) {
  TransferPlan plan;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), ::isspace), item.end());
    if (item.empty()) continue;
    const auto arrow = item.find("->");
    require(arrow != std::string::npos, ErrorKind::kConfig,
            "transfer plan entry '" + item + "' must look like src->dst");
    const std::string a = item.substr(0, arrow), b = item.substr(arrow + 2);
    const auto s = src.find(a);
    const auto d = dst.find(b);
    require(s.has_value(), ErrorKind::kConfig, "transfer plan: no source layer '" + a + "'");
    require(d.has_value(), ErrorKind::kConfig, "transfer plan: no destination layer '" + b + "'");
    plan.mapping.emplace_back(*s, *d);
  }
  return plan;
}

void freeze_dictionaries(LcnnModel<float>& model) {
  for (auto& l : model.layers)
    if (l.lcnn) l.lcnn->dict.frozen = true;
}

std::size_t head_layer(const LcnnModel<float>& model) {
  require(!model.layers.empty() && model.layers.back().kind == LayerKind::kLcnnFc,
          ErrorKind::kStructure, "the final layer must be a lookup fully connected layer");
  return model.layers.size() - 1;
}

LcnnModel<float> replace_head(const LcnnModel<float>& model, std::size_t new_classes, Rng& rng) {
  const std::size_t h = head_layer(model);
  require(new_classes >= 1, ErrorKind::kDimension, "new head needs at least one class");
  require(model.layers[h].lcnn->mode() == LayerMode::kTraining, ErrorKind::kMode,
          "replace_head needs a training-mode head");
  LcnnModel<float> out = model;
  Layer<float>& head = out.layers[h];
  const ConvGeom geom = fc_as_conv(head.lcnn->geom.m, new_classes);
  TrainConfig cfg;
  cfg.mode = model.sparsity;
  cfg.s_max = model.s_max;
  cfg.c = model.c;
  cfg.lambda_prime = model.lambda_prime;
  head.hyper = layer_hyper(geom, cfg);
  SparseCombiner<float> comb(geom.n, head.lcnn->dict.k, 1, 1);
  std::normal_distribution<double> dist(0.0, head.hyper.sigma);
  for (float& v : comb.p.data()) v = static_cast<float>(dist(rng));
  if (cfg.mode == SparsityMode::kThreshold) {
    apply_threshold(comb, head.hyper.epsilon);
  } else {
    comb.s_max = cfg.s_max;
    project_top_s(comb, cfg.s_max);
    comb.frozen_zero.assign(comb.p.size(), 0);
    for (std::size_t e = 0; e < comb.p.size(); ++e) comb.frozen_zero[e] = comb.p.data()[e] == 0.0f;
  }
  Dictionary<float> dict = head.lcnn->dict;
  dict.frozen = true;
  head.lcnn = LcnnConvLayer<float>::make(geom, std::move(dict), std::move(comb),
                                         std::vector<float>(new_classes, 0.0f));
  head.out = geom.output_shape();
  out.num_classes = new_classes;
  return out;
}

FewShotEpisode sample_episode(const std::vector<Sample<float>>& pool, std::size_t classes,
                              std::size_t shots, std::size_t queries_per_class,
                              std::uint64_t seed) {
  require(classes >= 1 && shots >= 1, ErrorKind::kConfig, "episode needs classes and shots >= 1");
  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    require(pool[i].label < classes, ErrorKind::kData,
            "episode pool label " + std::to_string(pool[i].label) + " out of range");
    by_class[pool[i].label].push_back(i);
  }
  Rng rng(seed);
  FewShotEpisode ep;
  ep.novel_class_count = classes;
  ep.shots_per_class = shots;
  ep.resample_seed = seed;
  for (std::size_t c = 0; c < classes; ++c) {
    auto& ids = by_class[c];
    require(ids.size() > shots, ErrorKind::kData,
            "class " + std::to_string(c) + " has too few samples for " + std::to_string(shots) +
                " shots plus a query");
    std::shuffle(ids.begin(), ids.end(), rng);
    for (std::size_t t = 0; t < shots; ++t) ep.support.push_back(pool[ids[t]]);
    const std::size_t q_end = std::min(ids.size(), shots + queries_per_class);
    for (std::size_t t = shots; t < q_end; ++t) ep.query.push_back(pool[ids[t]]);
  }
  return ep;
}

UpdatePolicy few_shot_policy(const LcnnModel<float>& model, double body_lr_ratio) {
  require(body_lr_ratio >= 0.0, ErrorKind::kConfig, "body learning-rate ratio must be >= 0");
  const std::size_t h = head_layer(model);
  UpdatePolicy policy(model.layers.size());
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    LayerPolicy& p = policy[l];
    p.update_dict = false;
    if (l == h) continue;
    p.p = body_lr_ratio > 0.0 ? LayerPolicy::PUpdate::kSupport : LayerPolicy::PUpdate::kNone;
    p.lr_scale = body_lr_ratio;
    p.update_bias = false;
    p.update_dense = false;
    p.enforce = false;
  }
  return policy;
}

std::size_t trainable_scalar_count(const LcnnModel<float>& model, const UpdatePolicy& policy) {
  require(policy.size() == model.layers.size(), ErrorKind::kStructure,
          "update policy does not match the model");
  std::size_t count = 0;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    const LayerPolicy& pol = policy[l];
    if (layer.lcnn) {
      const auto& lc = *layer.lcnn;
      const auto& comb = lc.combiner();
      const auto& p = comb.p.data();
      const bool masked = comb.frozen_zero.size() == p.size();
      for (std::size_t e = 0; e < p.size(); ++e) {
        switch (pol.p) {
          case LayerPolicy::PUpdate::kAll: count += !(masked && comb.frozen_zero[e]); break;
          case LayerPolicy::PUpdate::kSupport:
            count += p[e] != 0.0f && !(masked && comb.frozen_zero[e]);
            break;
          case LayerPolicy::PUpdate::kNone: break;
        }
      }
      if (pol.update_dict && !lc.dict.frozen) count += lc.dict.data.size();
      if (pol.update_bias) count += lc.bias.size();
    } else if (layer.dense) {
      if (pol.update_dense) count += layer.dense->w.size();
      if (pol.update_bias) count += layer.dense->bias.size();
    }
  }
  return count;
}

FewShotMetrics few_shot_finetune(LcnnModel<float>& model, const FewShotEpisode& episode,
                                 const TrainConfig& cfg, double body_lr_ratio) {
  for (const auto& l : model.layers)
    require(!l.lcnn || l.lcnn->dict.frozen, ErrorKind::kContract,
            "few-shot fine-tuning needs every dictionary frozen; layer '" + l.name +
                "' is not");
  require(model.num_classes == episode.novel_class_count, ErrorKind::kStructure,
          "head has " + std::to_string(model.num_classes) + " outputs for a " +
              std::to_string(episode.novel_class_count) + "-class episode");
  const std::size_t h = head_layer(model);
  const UpdatePolicy policy = few_shot_policy(model, body_lr_ratio);

  FewShotMetrics m;
  m.trainable_scalars = trainable_scalar_count(model, policy);
  const auto& head = *model.layers[h].lcnn;
  m.head_trainable = head.combiner().nonzeros() + head.bias.size();
  m.dense_head_params = head.geom.n * head.geom.m + head.geom.n;

  TrainConfig run = cfg;
  run.mode = model.sparsity;
  run.s_max = model.s_max;
  if (!episode.support.empty() && cfg.iterations > 0)
    train(model, episode.support, run, &policy);
  m.support_accuracy = evaluate(model, episode.support).top1_accuracy();
  m.query_accuracy = evaluate(model, episode.query).top1_accuracy();
  return m;
}

}  // namespace lcnn
