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

// Analytic operation counts and layer-wise speedup reports.
//
// Convention: a multiply-accumulate is 2 flops (1 mult + 1 add) on both the
// dense and the lookup path. The lookup-and-scale stage counts one mult and
// one add per gathered term. Bias adds and indexed reads of S are counted
// separately and are not flops.

#include <cstdint>
#include <string>
#include <vector>

#include "lcnn/model.hpp"

namespace lcnn {

// mults = adds = n*m*kh*kw*w'*h', bias_adds = n*w'*h'.
OpCount flops_dense(const ConvGeom& geom);

// Dictionary precompute: k*m*w*h mults and adds. Lookup-and-scale:
// n*mean_s*kh*kw*w'*h' mults, adds and lookups (rounded to the nearest
// integer), plus n*w'*h' bias adds.
StageCount flops_lcnn_stages(const ConvGeom& geom, std::size_t k, double mean_s);
OpCount flops_lcnn(const ConvGeom& geom, std::size_t k, double mean_s);

struct LayerCost {
  std::string layer;
  double share_pct = 0.0;  // share of the dense network's flops
  std::uint64_t dense_flops = 0;
  std::uint64_t lcnn_flops = 0;
  double speedup = 0.0;  // dense / lcnn

  bool operator==(const LayerCost&) const = default;
};

struct SpeedupReport {
  std::vector<LayerCost> rows;  // parameterized layers only
  std::uint64_t dense_total = 0;
  std::uint64_t lcnn_total = 0;
  double overall = 0.0;  // dense_total / lcnn_total

  bool operator==(const SpeedupReport&) const = default;
};

struct LayerFlops {
  std::string layer;
  std::uint64_t dense = 0;
  std::uint64_t lcnn = 0;
};

SpeedupReport make_report(const std::vector<LayerFlops>& layers);

// Uses the measured mean s of every lookup layer; the model must be in
// inference form. Dense layers cost the same on both sides.
SpeedupReport speedup_report(const LcnnModel<float>& model);

// Template costing: dictionary sizes from `policy` and one mean s for every
// lookup layer.
SpeedupReport speedup_report(const ArchSpec& arch, const DictPolicy& policy, double mean_s);

// Aligned text table: a convention header, one row per layer, then "overall".
std::string render_table(const SpeedupReport& report);

// CSV with header layer,share_pct,dense_flops,lcnn_flops,speedup; one row per
// layer and a final "overall" row. Reals are written with 17 significant
// digits so parse_csv recovers them exactly.
std::string render_csv(const SpeedupReport& report);
SpeedupReport parse_csv(const std::string& text);

}  // namespace lcnn
