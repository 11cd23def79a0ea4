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

#include "lcnn/perf.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace lcnn {

OpCount flops_dense(const ConvGeom& g) {
  const std::uint64_t out = g.out_w() * g.out_h();
  OpCount c;
  c.mults = g.n * g.m * g.taps() * out;
  c.adds = c.mults;
  c.bias_adds = g.n * out;
  c.bytes_params = 4 * (g.n * g.m * g.taps() + g.n);
  return c;
}

StageCount flops_lcnn_stages(const ConvGeom& g, std::size_t k, double mean_s) {
  require(k >= 1, ErrorKind::kDimension, "dictionary size must be >= 1");
  require(mean_s >= 0.0, ErrorKind::kDimension, "mean s must be >= 0");
  const std::uint64_t out = g.out_w() * g.out_h();
  StageCount s;
  s.precompute.mults = std::uint64_t(k) * g.m * g.in_w * g.in_h;
  s.precompute.adds = s.precompute.mults;
  const double terms = double(g.n) * mean_s * double(g.taps());
  const auto work = static_cast<std::uint64_t>(std::llround(terms * double(out)));
  s.scale.mults = work;
  s.scale.adds = work;
  s.scale.lookups = work;
  s.scale.bias_adds = g.n * out;
  s.scale.bytes_params =
      4 * (k * g.m + g.n) + 8 * static_cast<std::uint64_t>(std::llround(terms));
  return s;
}

OpCount flops_lcnn(const ConvGeom& g, std::size_t k, double mean_s) {
  return flops_lcnn_stages(g, k, mean_s).total();
}

SpeedupReport make_report(const std::vector<LayerFlops>& layers) {
  SpeedupReport r;
  for (const auto& l : layers) {
    r.dense_total += l.dense;
    r.lcnn_total += l.lcnn;
  }
  for (const auto& l : layers) {
    LayerCost c;
    c.layer = l.layer;
    c.dense_flops = l.dense;
    c.lcnn_flops = l.lcnn;
    c.share_pct = r.dense_total ? 100.0 * double(l.dense) / double(r.dense_total) : 0.0;
    c.speedup = l.lcnn ? double(l.dense) / double(l.lcnn) : 0.0;
    r.rows.push_back(std::move(c));
  }
  r.overall = r.lcnn_total ? double(r.dense_total) / double(r.lcnn_total) : 0.0;
  return r;
}

SpeedupReport speedup_report(const LcnnModel<float>& model) {
  require(model.inference_mode(), ErrorKind::kMode,
          "speedup report needs an inference-mode model (run convert first)");
  std::vector<LayerFlops> rows;
  for (const auto& l : model.layers) {
    if (l.lcnn) {
      const auto& lc = *l.lcnn;
      rows.push_back({l.name, flops_dense(lc.geom).flops(),
                      flops_lcnn(lc.geom, lc.dict.k, lc.tables().mean_s()).flops()});
    } else if (l.dense) {
      const auto f = flops_dense(l.dense->geom).flops();
      rows.push_back({l.name, f, f});
    }
  }
  return make_report(rows);
}

SpeedupReport speedup_report(const ArchSpec& arch, const DictPolicy& policy, double mean_s) {
  const auto resolved = resolve(arch);
  const auto ks = dictionary_sizes(resolved, policy);
  std::vector<LayerFlops> rows;
  std::size_t next = 0;
  for (const auto& rl : resolved) {
    if (!rl.geom) continue;
    const auto dense = flops_dense(*rl.geom).flops();
    const auto lcnn =
        is_lcnn(rl.spec.kind) ? flops_lcnn(*rl.geom, ks[next++], mean_s).flops() : dense;
    rows.push_back({rl.spec.name, dense, lcnn});
  }
  return make_report(rows);
}

std::string render_table(const SpeedupReport& r) {
  std::ostringstream os;
  os << "# flops = mults + adds (multiply-accumulate = 2 flops); lookup-and-scale adds "
        "included; bias adds and S reads excluded\n";
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %9s %18s %18s %10s\n", "layer", "comp %", "dense flops",
                "lcnn flops", "speedup");
  os << line;
  for (const auto& c : r.rows) {
    std::snprintf(line, sizeof line, "%-16s %8.2f%% %18" PRIu64 " %18" PRIu64 " %9.2fx\n",
                  c.layer.c_str(), c.share_pct, c.dense_flops, c.lcnn_flops, c.speedup);
    os << line;
  }
  std::snprintf(line, sizeof line, "%-16s %8.2f%% %18" PRIu64 " %18" PRIu64 " %9.2fx\n",
                "overall", 100.0, r.dense_total, r.lcnn_total, r.overall);
  os << line;
  return os.str();
}

std::string render_csv(const SpeedupReport& r) {
  std::ostringstream os;
  os << "layer,share_pct,dense_flops,lcnn_flops,speedup\n";
  char line[256];
  auto row = [&](const std::string& name, double share, std::uint64_t d, std::uint64_t l,
                 double s) {
    std::snprintf(line, sizeof line, "%s,%.17g,%" PRIu64 ",%" PRIu64 ",%.17g\n", name.c_str(),
                  share, d, l, s);
    os << line;
  };
  for (const auto& c : r.rows) row(c.layer, c.share_pct, c.dense_flops, c.lcnn_flops, c.speedup);
  row("overall", 100.0, r.dense_total, r.lcnn_total, r.overall);
  return os.str();
}

SpeedupReport parse_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  require(std::getline(is, line) && line == "layer,share_pct,dense_flops,lcnn_flops,speedup",
          ErrorKind::kFormat, "speedup CSV header not recognized");
  SpeedupReport r;
  bool have_overall = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    require(f.size() == 5, ErrorKind::kFormat, "speedup CSV row needs 5 fields: " + line);
    LayerCost c;
    try {
      c.layer = f[0];
      c.share_pct = std::stod(f[1]);
      c.dense_flops = std::stoull(f[2]);
      c.lcnn_flops = std::stoull(f[3]);
      c.speedup = std::stod(f[4]);
    } catch (const std::exception&) {
      fail(ErrorKind::kFormat, "bad number in speedup CSV row: " + line);
    }
    if (c.layer == "overall") {
      r.dense_total = c.dense_flops;
      r.lcnn_total = c.lcnn_flops;
      r.overall = c.speedup;
      have_overall = true;
    } else {
      r.rows.push_back(std::move(c));
    }
  }
  require(have_overall, ErrorKind::kFormat, "speedup CSV has no overall row");
  return r;
}

}  // namespace lcnn
