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

// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance            all criteria
//   acceptance 1 4 10     selected criteria
//
// Exit status is 0 only when every selected criterion passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lcnn/dataset.hpp"
#include "lcnn/executor.hpp"
#include "lcnn/experiments.hpp"
#include "lcnn/perf.hpp"
#include "lcnn/serialize.hpp"
#include "lcnn/transfer.hpp"
#include "../support/oracles.hpp"

using namespace lcnn;
namespace fs = std::filesystem;

namespace {

// Tolerances and sizes, fixed here rather than taken from the command line.
constexpr double kPathTol = 1e-5;
constexpr std::size_t kPathInstances = 200;
constexpr double kShiftTol = 1e-6;
constexpr std::size_t kShiftInstances = 100;
constexpr double kFdStep = 1e-3;
constexpr double kFdTol = 1e-3;
constexpr double kFdSkip = 1e-2;
constexpr std::size_t kSparsitySteps = 500;
constexpr std::size_t kRoundTrips = 1000;
constexpr double kLearningGapPoints = 3.0;
constexpr double kLearningMinSpeedup = 2.0;
constexpr std::size_t kLearningIterations = 4000;
constexpr std::size_t kFewShotEpisodes = 5;
constexpr std::size_t kTransferIterations = 500;
constexpr std::size_t kFlopGeometries = 20;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

template <class T>
double rel(const Tensor3<T>& a, const Tensor3<T>& ref) {
  return oracle::rel_error(a.data(), ref.data());
}

ConvGeom random_geom(oracle::Rng& rng, std::size_t max_mn, bool stride_one) {
  static const std::size_t kernels[] = {1, 3, 5};
  const std::size_t kk = kernels[oracle::pick(rng, 0, 2)];
  const std::size_t stride = stride_one ? 1 : oracle::pick(rng, 1, 2);
  const std::size_t pad = oracle::pick(rng, 0, 2);
  auto side = [&] {
    std::size_t in = oracle::pick(rng, std::max<std::size_t>(kk, 1), 11);
    while ((in + 2 * pad - kk) % stride) ++in;
    return in;
  };
  const std::size_t w = side(), h = side();
  return ConvGeom::make(oracle::pick(rng, 1, max_mn), oracle::pick(rng, 1, max_mn), kk, kk,
                        stride, pad, w, h);
}

Tensor3<float> random_input(const Shape3& s, oracle::Rng& rng) {
  Tensor3<float> x(s);
  oracle::fill_normal(x.data(), rng);
  return x;
}

// ---------------------------------------------------------------------------

Outcome path_equivalence() {
  oracle::Rng rng(101);
  double worst = 0.0, worst_oracle = 0.0;
  for (std::size_t t = 0; t < kPathInstances; ++t) {
    const ConvGeom g = random_geom(rng, 8, false);
    const std::size_t k = oracle::pick(rng, 1, 8);
    Dictionary<float> d(k, g.m);
    oracle::fill_normal(d.data, rng);
    const SparseCombiner<float> comb(oracle::sparse_p<float>(g.n, k, g.kh, g.kw, 0.5, rng));
    std::vector<float> bias(g.n);
    oracle::fill_normal(bias, rng);
    const auto x = random_input(g.input_shape(), rng);

    const auto sparse = LcnnConvLayer<float>::make(g, d, comb, bias);
    const auto lookup = LcnnConvLayer<float>::make(g, d, p_to_ic(comb), bias);
    const auto dense =
        conv2d_dense(x, reconstruct_weights(d, comb, g), std::span<const float>(bias), g);
    const auto ys = forward_sparse(x, sparse);
    const auto yl = forward_lookup(x, lookup);
    worst = std::max({worst, rel(yl, dense), rel(ys, dense), rel(yl, ys)});
    const auto ref = oracle::conv(x, oracle::reconstruct(d, lookup.tables(), g), bias, g);
    worst_oracle = std::max(worst_oracle, rel(dense, ref));
  }
  Outcome o;
  o.pass = worst <= kPathTol && worst_oracle <= kPathTol;
  o.detail = std::to_string(kPathInstances) + " layers, max rel " + fmt("%.2e", worst) +
             ", vs oracle " + fmt("%.2e", worst_oracle) + ", tol " + fmt("%.0e", kPathTol);
  return o;
}

Outcome shifted_sum() {
  oracle::Rng rng(202);
  double worst = 0.0;
  for (std::size_t t = 0; t < kShiftInstances; ++t) {
    const ConvGeom g = random_geom(rng, 8, true);
    Tensor4<float> w(g.n, g.m, g.kh, g.kw);
    oracle::fill_normal(w.data(), rng);
    const auto x = random_input(g.input_shape(), rng);
    const auto dense = conv2d_dense(x, w, std::span<const float>(), g);
    worst = std::max(worst, rel(conv2d_as_shifted_sum(x, w, g), dense));
  }
  return {worst <= kShiftTol, std::to_string(kShiftInstances) + " stride-1 instances, max rel " +
                                  fmt("%.2e", worst) + ", tol " + fmt("%.0e", kShiftTol)};
}

Outcome one_hot_identity() {
  oracle::Rng rng(303);
  const std::size_t k = 4;
  const auto s = random_input({k, 6, 6}, rng);
  std::size_t checked = 0, mismatched = 0;
  for (const std::size_t kk : {1, 3, 5}) {
    const std::size_t pad = (kk - 1) / 2;
    const auto g = ConvGeom::make(k, 1, kk, kk, 1, pad, 6, 6);
    for (std::size_t t = 0; t < k; ++t) {
      Tensor3<float> channel(1, 6, 6);
      for (std::size_t y = 0; y < 6; ++y)
        for (std::size_t x = 0; x < 6; ++x) channel.at(0, x, y) = s.at(t, x, y);
      for (std::size_t r = 0; r < kk; ++r)
        for (std::size_t c = 0; c < kk; ++c) {
          const auto y = conv2d_dense(s, one_hot_kernel<float>(t, r, c, k, kk, kk),
                                      std::span<const float>(), g);
          const auto expect = shift2d(channel, std::ptrdiff_t(pad) - std::ptrdiff_t(r),
                                      std::ptrdiff_t(pad) - std::ptrdiff_t(c));
          ++checked;
          mismatched += y.data() != expect.data();
        }
    }
  }
  return {mismatched == 0, std::to_string(checked) + " (t,r,c) cases on a 4x6x6 S, " +
                               std::to_string(mismatched) + " inexact"};
}

Outcome gradients() {
  TrainConfig cfg;
  cfg.seed = 3;
  cfg.lambda_prime = 0.3;
  cfg.dict_policy.kind = DictPolicy::Kind::kExplicit;
  cfg.dict_policy.sizes = {5, 2};
  const auto model = cast_model<double>(
      init_model(parse_layer_list("lconv:4:3:1:1,flatten,lfc:3", {2, 7, 7}, 3), cfg));

  oracle::Rng rng(404);
  std::vector<Sample<double>> batch;
  for (std::size_t i = 0; i < 3; ++i) {
    Sample<double> s{Tensor3<double>(2, 7, 7), i % 3};
    oracle::fill_normal(s.x.data(), rng);
    batch.push_back(std::move(s));
  }

  Outcome o;
  std::set<std::string> covered;
  double worst = 0.0;
  std::size_t probed = 0;
  for (const Route route : {Route::kSparse, Route::kFactored}) {
    FdOptions opt;
    opt.step = kFdStep;
    opt.skip_below = kFdSkip;
    opt.coords_per_tensor = 40;
    opt.route = route;
    const FdReport r = finite_diff_check(model, batch, kFdTol, opt);
    o.pass = o.pass && r.passed;
    worst = std::max(worst, r.max_rel_error);
    for (const auto& t : r.tensors) {
      probed += t.probed;
      if (t.probed) covered.insert(std::to_string(t.layer) + t.tensor);
    }
  }
  // dP, dD and dBias of both lookup layers must all have been probed.
  for (const char* key : {"0P", "0D", "0bias", "2P", "2D", "2bias"})
    o.pass = o.pass && covered.count(key);
  o.detail = "lconv->flatten->lfc, float64, step " + fmt("%.0e", kFdStep) + ", " +
             std::to_string(probed) + " coords over 2 routes, max rel " + fmt("%.2e", worst) +
             ", tol " + fmt("%.0e", kFdTol);
  return o;
}

Dataset small_set(std::size_t classes, std::size_t per_class, Shape3 shape, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.shape = shape;
  spec.classes = classes;
  spec.per_class = per_class;
  spec.sample_seed = seed;
  return make_synthetic(spec);
}

template <class F>
void for_each_combiner(LcnnModel<float>& m, F&& f) {
  for (const auto id : m.lcnn_layer_ids()) f(m.layers[id], m.layers[id].lcnn->combiner());
}

Outcome sparsity_invariants() {
  const Dataset data = small_set(4, 16, {3, 16, 16}, 5);
  const std::span<const Sample<float>> all(data.samples);
  Outcome o;
  std::size_t violations = 0, regrowths = 0, non_idempotent = 0;

  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.01;
  cfg.dict_policy.kind = DictPolicy::Kind::kExplicit;
  cfg.dict_policy.sizes = {12, 24, 6};

  {
    TrainConfig fixed = cfg;
    fixed.mode = SparsityMode::kFixedS;
    fixed.s_max = 2;
    auto model = init_model(toy_cnn({3, 16, 16}, 4), fixed);
    OptimizerState<float> st;
    for (std::size_t it = 0; it < kSparsitySteps; ++it) {
      train_step<float>(all.subspan((it * 8) % all.size(), 8), model, fixed, st);
      for_each_combiner(model, [&](auto&, auto& comb) { violations += comb.max_column_l0() > 2; });
    }
    for_each_combiner(model, [&](auto&, auto& comb) {
      auto once = comb;
      project_top_s(once, 2);
      auto twice = once;
      project_top_s(twice, 2);
      non_idempotent += !(once == twice) || !(once == comb);
    });
  }

  {
    TrainConfig thr = cfg;
    thr.mode = SparsityMode::kThreshold;
    thr.c = 0.1;
    thr.lambda_prime = 0.5;
    auto model = init_model(toy_cnn({3, 16, 16}, 4), thr);
    OptimizerState<float> st;
    std::vector<std::vector<bool>> zeros;
    for_each_combiner(model, [&](auto&, auto& comb) {
      std::vector<bool> z;
      for (float v : comb.p.data()) z.push_back(v == 0.0f);
      zeros.push_back(z);
    });
    for (std::size_t it = 0; it < kSparsitySteps; ++it) {
      train_step<float>(all.subspan((it * 8) % all.size(), 8), model, thr, st);
      std::size_t li = 0;
      for_each_combiner(model, [&](auto&, auto& comb) {
        auto& z = zeros[li++];
        for (std::size_t e = 0; e < z.size(); ++e) {
          const bool now = comb.p.data()[e] == 0.0f;
          regrowths += z[e] && !now;
          z[e] = now;
        }
      });
    }
    std::size_t zeroed = 0, total = 0;
    for (const auto& z : zeros)
      for (bool b : z) zeroed += b, ++total;
    for_each_combiner(model, [&](auto& layer, auto& comb) {
      auto once = comb;
      apply_threshold(once, layer.hyper.epsilon);
      auto twice = once;
      apply_threshold(twice, layer.hyper.epsilon);
      non_idempotent += !(once == twice) || !(once == comb);
    });
    o.detail = "fixed-s: " + std::to_string(violations) + " column violations over " +
               std::to_string(kSparsitySteps) + " steps; threshold: " +
               std::to_string(regrowths) + " regrown zeros, final zero share " +
               fmt("%.3f", double(zeroed) / double(total)) + "; ";
  }

  // Projections applied to fresh random combiners.
  oracle::Rng rng(505);
  for (int t = 0; t < 200; ++t) {
    SparseCombiner<float> comb(oracle::sparse_p<float>(oracle::pick(rng, 1, 6),
                                                       oracle::pick(rng, 1, 8), 3, 3, 0.7, rng));
    const std::size_t s = oracle::pick(rng, 1, 4);
    auto a = comb;
    project_top_s(a, s);
    auto b = a;
    project_top_s(b, s);
    auto c = comb;
    apply_threshold(c, 0.5);
    auto d = c;
    apply_threshold(d, 0.5);
    non_idempotent += !(a == b) + !(c == d);
  }
  o.detail += std::to_string(non_idempotent) + " non-idempotent projections";
  o.pass = violations == 0 && regrowths == 0 && non_idempotent == 0;
  return o;
}

Outcome round_trips() {
  oracle::Rng rng(606);
  std::size_t bad = 0;
  for (std::size_t t = 0; t < kRoundTrips; ++t) {
    const std::size_t kk = oracle::pick(rng, 1, 3) * 2 - 1;
    const SparseCombiner<float> comb(oracle::sparse_p<float>(
        oracle::pick(rng, 1, 8), oracle::pick(rng, 1, 8), kk, kk, oracle::pick(rng, 0, 10) / 10.0,
        rng));
    bad += !(ic_to_p(p_to_ic(comb), comb.k()).p == comb.p);
  }

  TrainConfig cfg;
  cfg.iterations = 20;
  cfg.batch_size = 8;
  const Dataset data = small_set(4, 8, {3, 16, 16}, 6);
  auto model = init_model(toy_resnet(1, {3, 16, 16}, 4), cfg);
  train(model, data.samples, cfg);
  std::size_t file_bad = 0;
  for (int form = 0; form < 2; ++form) {
    if (form == 1) convert_to_inference(model);
    const auto path = (fs::temp_directory_path() / "lcnn_acceptance_roundtrip.lcnn").string();
    save_model(model, path);
    const auto bytes = read_file(path);
    const auto loaded = load_model(path);
    file_bad += !(loaded == model) || serialize_model(loaded) != bytes;
    fs::remove(path);
  }
  return {bad == 0 && file_bad == 0,
          std::to_string(kRoundTrips) + " combiners, " + std::to_string(bad) +
              " mismatched; model file (training and inference form) " +
              (file_bad ? "differs" : "bitwise identical")};
}

Outcome learning_analog() {
  SyntheticSpec spec;
  spec.per_class = 500;
  spec.noise = 0.3;
  spec.separation = 0.25;
  const Dataset train_data = make_synthetic(spec);
  spec.per_class = 100;
  spec.sample_seed = 99;
  const Dataset test_data = make_synthetic(spec);

  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.batch_size = 32;
  cfg.momentum = 0.9;
  cfg.iterations = kLearningIterations;
  cfg.seed = 1;
  cfg.dict_policy.kind = DictPolicy::Kind::kFraction;
  cfg.dict_policy.fraction = 0.5;

  const ArchSpec arch = toy_cnn({3, 32, 32}, 10);
  auto lcnn_model = init_model(arch, cfg);
  train(lcnn_model, train_data.samples, cfg);
  auto dense_model = init_model(with_dense_layers(arch), cfg);
  train(dense_model, train_data.samples, cfg);
  const double acc_l = evaluate(lcnn_model, test_data.samples).top1_accuracy();
  const double acc_d = evaluate(dense_model, test_data.samples).top1_accuracy();

  // Flop reduction as reported by the bench command on the converted model.
  const double l0 = mean_l0(lcnn_model);
  convert_to_inference(lcnn_model);
  const auto dir = fs::temp_directory_path() / "lcnn_acceptance_bench";
  fs::create_directories(dir);
  save_model(lcnn_model, (dir / "m.lcnn").string());
  CommandOptions opt;
  opt.model = (dir / "m.lcnn").string();
  opt.csv = (dir / "b.csv").string();
  std::ostringstream out, err;
  double speedup = 0.0;
  if (run_command("bench", opt, out, err) == 0) {
    const auto csv = read_file(opt.csv);
    speedup = parse_csv(std::string(csv.begin(), csv.end())).overall;
  }

  const double gap = 100.0 * (acc_d - acc_l);
  Outcome o;
  o.pass = gap <= kLearningGapPoints && speedup >= kLearningMinSpeedup;
  o.detail = "test acc lcnn " + fmt("%.1f%%", 100 * acc_l) + " vs dense " +
             fmt("%.1f%%", 100 * acc_d) + " (gap " + fmt("%.1f", gap) + " pts, need <= " +
             fmt("%.0f", kLearningGapPoints) + "); bench overall " + fmt("%.3fx", speedup) +
             " (need >= " + fmt("%.0fx", kLearningMinSpeedup) + ") at mean l0 " + fmt("%.2f", l0);
  return o;
}

// Scalars a few-shot step may touch, read straight off the model.
std::size_t brute_force_trainable(const LcnnModel<float>& model, bool body_trains) {
  std::size_t n = 0;
  const std::size_t head = model.layers.size() - 1;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    if (!layer.lcnn) continue;
    const auto& comb = layer.lcnn->combiner();
    for (std::size_t e = 0; e < comb.p.size(); ++e)
      n += l == head ? comb.frozen_zero[e] == 0 : body_trains && comb.p.data()[e] != 0.0f;
    if (l == head) n += layer.lcnn->bias.size();
  }
  return n;
}

Outcome few_shot() {
  const Shape3 shape{3, 16, 16};
  TrainConfig cfg;
  cfg.iterations = 3000;
  cfg.batch_size = 16;
  cfg.dict_policy.first = 3;
  cfg.dict_policy.base = 4;
  cfg.dict_policy.fc = 8;
  LcnnModel<float> base = init_model(toy_resnet(1, shape, 5), cfg);
  train(base, small_set(5, 40, shape, 11).samples, cfg);
  freeze_dictionaries(base);

  SyntheticSpec novel;
  novel.shape = shape;
  novel.classes = 5;
  novel.first_class = 5;
  novel.per_class = 4 + 10;
  novel.sample_seed = 12;
  const Dataset pool = make_synthetic(novel);

  constexpr double kRatio = 0.1;
  std::size_t dict_changed = 0, support_changed = 0, count_mismatch = 0;
  std::map<std::size_t, double> acc;
  for (const std::size_t shots : {1, 2, 4}) {
    for (std::size_t ep = 0; ep < kFewShotEpisodes; ++ep) {
      const std::uint64_t seed = 1000 * shots + ep;
      Rng rng(seed);
      LcnnModel<float> m = replace_head(base, 5, rng);
      const LcnnModel<float> before = m;
      const auto episode = sample_episode(pool.samples, 5, shots, 10, seed);
      TrainConfig ft = cfg;
      ft.iterations = 100;
      ft.batch_size = episode.support.size();
      ft.seed = seed;
      const FewShotMetrics fm = few_shot_finetune(m, episode, ft, kRatio);
      acc[shots] += fm.query_accuracy / double(kFewShotEpisodes);
      count_mismatch += fm.trainable_scalars != brute_force_trainable(before, true);

      const std::size_t head = m.layers.size() - 1;
      for (const auto id : m.lcnn_layer_ids()) {
        dict_changed += m.layers[id].lcnn->dict.data != base.layers[id].lcnn->dict.data;
        if (id == head) continue;
        const auto& p0 = before.layers[id].lcnn->combiner().p.data();
        const auto& p1 = m.layers[id].lcnn->combiner().p.data();
        for (std::size_t e = 0; e < p0.size(); ++e)
          support_changed += (p0[e] != 0.0f) != (p1[e] != 0.0f);
      }
    }
  }
  double mean = 0.0;
  std::string per;
  for (const auto& [shots, a] : acc) {
    mean += a / double(acc.size());
    per += " " + std::to_string(shots) + "-shot " + fmt("%.3f", a);
  }
  const double chance = 1.0 / 5.0;
  Outcome o;
  o.pass = dict_changed == 0 && support_changed == 0 && count_mismatch == 0 && mean > chance;
  o.detail = std::to_string(kFewShotEpisodes) + " episodes per shot count; (a) " +
             std::to_string(dict_changed) + " dictionaries changed, (b) " +
             std::to_string(support_changed) + " body support flips, (c) " +
             std::to_string(count_mismatch) + " count mismatches, (d) mean query acc " +
             fmt("%.3f", mean) + " vs chance " + fmt("%.3f", chance) + " [" + per.substr(1) +
             "]";
  return o;
}

double mean_data_loss(const LcnnModel<float>& model, const std::vector<Sample<float>>& data) {
  const Executor<float> exec(model);
  double sum = 0.0;
  for (const auto& s : data) sum += softmax_cross_entropy(exec.forward(s.x), s.label).loss;
  return sum / double(data.size());
}

Outcome few_iteration() {
  const Shape3 shape{3, 16, 16};
  const Dataset data = small_set(10, 30, shape, 21);
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.dict_policy.first = 3;
  cfg.dict_policy.base = 4;
  cfg.dict_policy.fc = 8;

  TrainConfig src_cfg = cfg;
  src_cfg.iterations = 3000;
  src_cfg.seed = 31;
  LcnnModel<float> src = init_model(toy_resnet(1, shape, 10), src_cfg);
  train(src, data.samples, src_cfg);

  TrainConfig dst_cfg = cfg;
  dst_cfg.iterations = kTransferIterations;
  dst_cfg.seed = 32;
  const LcnnModel<float> fresh = init_model(toy_resnet(2, shape, 10), dst_cfg);

  TransferReport report;
  LcnnModel<float> transferred =
      transfer_dictionaries(src, fresh, auto_transfer_plan(src, fresh), &report);
  LcnnModel<float> control = fresh;
  freeze_dictionaries(control);

  const double loss0_t = mean_data_loss(transferred, data.samples);
  const double loss0_c = mean_data_loss(control, data.samples);
  train(transferred, data.samples, dst_cfg);
  train(control, data.samples, dst_cfg);
  const double loss_t = mean_data_loss(transferred, data.samples);
  const double loss_c = mean_data_loss(control, data.samples);

  Outcome o;
  o.pass = report.applied.size() == transferred.lcnn_layer_ids().size() && loss_t < loss0_t &&
           loss_t < loss_c;
  o.detail = std::to_string(report.applied.size()) + "/" +
             std::to_string(transferred.lcnn_layer_ids().size()) +
             " dictionaries transferred; train loss " + fmt("%.4f", loss0_t) + " -> " +
             fmt("%.4f", loss_t) + " after " + std::to_string(kTransferIterations) +
             " iterations; random frozen control " + fmt("%.4f", loss0_c) + " -> " +
             fmt("%.4f", loss_c);
  return o;
}

Outcome flop_accounting() {
  oracle::Rng rng(1010);
  std::size_t mismatched = 0;
  for (std::size_t t = 0; t < kFlopGeometries; ++t) {
    const ConvGeom g = random_geom(rng, 8, false);
    const auto x = random_input(g.input_shape(), rng);
    OpCount dense;
    conv2d_dense(x, Tensor4<float>(g.n, g.m, g.kh, g.kw), std::span<const float>(), g, &dense);
    mismatched += dense.mults != flops_dense(g).mults || dense.adds != flops_dense(g).adds;

    const std::size_t k = oracle::pick(rng, 1, 8);
    Dictionary<float> d(k, g.m);
    oracle::fill_normal(d.data, rng);
    const auto tab = p_to_ic(SparseCombiner<float>(oracle::sparse_p<float>(g.n, k, g.kh, g.kw, 0.4, rng)));
    StageCount measured;
    forward_lookup(x, LcnnConvLayer<float>::make(g, d, tab, std::vector<float>(g.n)), &measured);
    const auto analytic = flops_lcnn(g, k, tab.mean_s());
    mismatched += measured.total().mults != analytic.mults ||
                  measured.total().adds != analytic.adds;
  }

  // A trained, converted model: report rows against executor counters.
  TrainConfig cfg;
  cfg.iterations = 30;
  cfg.batch_size = 8;
  auto model = init_model(toy_cnn({3, 16, 16}, 4), cfg);
  train(model, small_set(4, 8, {3, 16, 16}, 8).samples, cfg);
  convert_to_inference(model);
  const SpeedupReport rep = speedup_report(model);
  std::vector<StageCount> counts;
  Executor<float>(model).forward(Tensor3<float>(model.input), nullptr, &counts);
  std::uint64_t dsum = 0, lsum = 0;
  std::size_t row = 0;
  for (const auto id : model.lcnn_layer_ids()) {
    const auto& r = rep.rows.at(row++);
    mismatched += r.lcnn_flops != counts[id].total().flops() ||
                  r.dense_flops != flops_dense(model.layers[id].geom()).flops();
  }
  for (const auto& r : rep.rows) dsum += r.dense_flops, lsum += r.lcnn_flops;
  const bool overall_exact = rep.overall == double(dsum) / double(lsum) &&
                             rep.dense_total == dsum && rep.lcnn_total == lsum;

  DictPolicy fast;
  fast.first = 3;
  fast.base = 30;
  fast.fc = 512;
  const SpeedupReport alex = speedup_report(alexnet_template(), fast, 1.0);
  std::vector<std::string> names;
  for (const auto& r : alex.rows) names.push_back(r.layer);
  const std::vector<std::string> expect = {"conv1", "conv2", "conv3", "conv4",
                                           "conv5", "fc6",   "fc7",   "fc8"};
  std::istringstream table(render_table(alex));
  std::vector<std::string> body;
  for (std::string line; std::getline(table, line);)
    if (!line.empty() && line[0] != '#' && line.rfind("layer", 0) != 0) body.push_back(line);
  bool alex_ok = names == expect && body.size() == 9 && body.back().rfind("overall", 0) == 0;
  for (std::size_t i = 0; alex_ok && i < 8; ++i) alex_ok = body[i].rfind(expect[i], 0) == 0;

  return {mismatched == 0 && overall_exact && alex_ok,
          std::to_string(kFlopGeometries) + " geometries + " + std::to_string(rep.rows.size()) +
              " model layers, " + std::to_string(mismatched) + " counter mismatches; overall " +
              (overall_exact ? "exact" : "inexact") + "; alexnet table " +
              std::to_string(body.size()) + " rows" + (alex_ok ? "" : " (bad structure)")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"path equivalence", path_equivalence},
      {"shifted-sum decomposition", shifted_sum},
      {"one-hot identity", one_hot_identity},
      {"gradients vs finite differences", gradients},
      {"sparsity invariants", sparsity_invariants},
      {"round trips", round_trips},
      {"desk-scale learning", learning_analog},
      {"few-shot mechanism", few_shot},
      {"few-iteration transfer", few_iteration},
      {"flop accounting", flop_accounting},
  };
  std::set<std::size_t> selected;
  for (int i = 1; i < argc; ++i) {
    const long v = std::strtol(argv[i], nullptr, 10);
    if (v < 1 || v > long(criteria.size())) {
      std::fprintf(stderr, "usage: %s [criterion 1-%zu ...]\n", argv[0], criteria.size());
      return 2;
    }
    selected.insert(std::size_t(v));
  }
  set_warning_handler([](const std::string&) {});

  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected.empty() && !selected.count(i + 1)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2zu %s  %s: %s [%.1fs]\n", i + 1, o.pass ? "PASS" : "FAIL",
                criteria[i].first, o.detail.c_str(), secs);
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
