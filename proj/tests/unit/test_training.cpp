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

#include <doctest.h>

#include <cmath>

#include "lcnn/training.hpp"
#include "../support/oracles.hpp"

using namespace lcnn;

namespace {

// Two classes: bright left half vs bright right half, plus noise.
std::vector<Sample<float>> halves(std::size_t per_class, std::uint64_t seed, Shape3 shape) {
  oracle::Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::vector<Sample<float>> out;
  for (std::size_t i = 0; i < per_class; ++i)
    for (std::size_t label = 0; label < 2; ++label) {
      Tensor3<float> x(shape);
      for (std::size_t ch = 0; ch < shape.channels; ++ch)
        for (std::size_t y = 0; y < shape.height; ++y)
          for (std::size_t xx = 0; xx < shape.width; ++xx) {
            const bool left = xx < shape.width / 2;
            x.at(ch, xx, y) = float((left == (label == 0) ? 1.0 : 0.0) + noise(rng));
          }
      out.push_back({x, label});
    }
  return out;
}

std::vector<Sample<double>> to_double(const std::vector<Sample<float>>& v) {
  std::vector<Sample<double>> out;
  for (const auto& s : v) out.push_back({cast<double>(s.x), s.label});
  return out;
}

ArchSpec small_arch(Shape3 in = {2, 6, 6}) {
  return parse_layer_list("lconv:4:3:1:1,relu,maxpool:2:2,flatten,lfc:2", in, 2);
}

TrainConfig cfg_with(SparsityMode mode, std::uint64_t seed = 1) {
  TrainConfig cfg;
  cfg.mode = mode;
  cfg.seed = seed;
  cfg.s_max = 2;
  cfg.dict_policy.kind = DictPolicy::Kind::kExplicit;
  cfg.dict_policy.sizes = {3, 4};
  return cfg;
}

}  // namespace

TEST_CASE("initialization hyperparameters") {
  TrainConfig cfg;
  cfg.c = 0.01;
  cfg.lambda_prime = 0.3;
  // fan_in + fan_out = 800 gives sigma = 0.05.
  const auto h = layer_hyper(ConvGeom::make(400, 400, 1, 1, 1, 0, 1, 1), cfg);
  CHECK(h.sigma == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(h.epsilon == doctest::Approx(5e-4).epsilon(1e-12));
  CHECK(h.lambda == doctest::Approx(1.5e-4).epsilon(1e-12));
}

TEST_CASE("init_layer") {
  const auto g = ConvGeom::make(8, 16, 3, 3, 1, 1, 4, 4);
  SUBCASE("deterministic") {
    TrainConfig cfg;
    Rng a(9), b(9);
    CHECK(init_layer(g, 6, cfg, a) == init_layer(g, 6, cfg, b));
  }
  SUBCASE("threshold mode pins small entries") {
    TrainConfig cfg;
    cfg.c = 0.5;
    Rng rng(3);
    const auto layer = init_layer(g, 6, cfg, rng);
    const auto eps = layer_hyper(g, cfg).epsilon;
    const auto& comb = layer.combiner();
    std::size_t pinned = 0;
    for (std::size_t e = 0; e < comb.p.size(); ++e) {
      if (comb.frozen_zero[e]) {
        ++pinned;
        CHECK(comb.p.data()[e] == 0.0f);
      } else {
        CHECK(std::abs(comb.p.data()[e]) > eps);
      }
    }
    CHECK(pinned > 0);
    for (float b : layer.bias) CHECK(b == 0.0f);
  }
  SUBCASE("fixed-s mode projects") {
    TrainConfig cfg;
    cfg.mode = SparsityMode::kFixedS;
    cfg.s_max = 2;
    Rng rng(3);
    const auto layer = init_layer(g, 6, cfg, rng);
    CHECK(layer.combiner().max_column_l0() == 2);
    CHECK(layer.combiner().s_max == 2);
  }
  SUBCASE("sample spread") {
    TrainConfig cfg;
    cfg.c = 1e-9;
    Rng rng(4);
    const auto big = ConvGeom::make(64, 64, 3, 3, 1, 1, 3, 3);
    const auto layer = init_layer(big, 96, cfg, rng);
    auto rms = [](const std::vector<float>& v) {
      double ss = 0;
      for (float x : v) ss += double(x) * x;
      return std::sqrt(ss / double(v.size()));
    };
    CHECK(dictionary_sigma(64, 96) == doctest::Approx(std::sqrt(2.0 / 160.0)));
    CHECK(rms(layer.dict.data) == doctest::Approx(dictionary_sigma(64, 96)).epsilon(0.05));
    CHECK(rms(layer.combiner().p.data()) == doctest::Approx(layer_hyper(big, cfg).sigma).epsilon(0.05));
    // Reconstructed weights keep roughly the layer variance: k * sd_D^2 * sigma^2.
    const auto w = reconstruct_weights(layer.dict, layer.combiner(), big);
    const double expect = std::sqrt(96.0) * dictionary_sigma(64, 96) * layer_hyper(big, cfg).sigma;
    CHECK(rms(w.data()) == doctest::Approx(expect).epsilon(0.1));
  }
}

TEST_CASE("TrainConfig validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.c = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.lambda_prime = -1;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.mode = SparsityMode::kFixedS;
  cfg.s_max = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("l1_of_P") {
  CHECK(l1_of_P(SparseCombiner<float>(Tensor4<float>(1, 3, 1, 1, {0.5f, -0.9f, 0.1f}))) ==
        doctest::Approx(1.5).epsilon(1e-7));
  CHECK(l1_of_P(SparseCombiner<float>(2, 3, 3, 3)) == 0.0);
  oracle::Rng rng(1);
  const SparseCombiner<double> comb(oracle::sparse_p<double>(4, 5, 3, 3, 0.5, rng));
  double ref = 0;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 5; ++j)
      for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 3; ++c) ref += std::abs(comb.p.at(i, j, r, c));
  CHECK(l1_of_P(comb) == ref);
}

TEST_CASE("project_top_s") {
  SUBCASE("rank by magnitude") {
    SparseCombiner<float> comb(Tensor4<float>(1, 3, 1, 1, {0.5f, -0.9f, 0.1f}));
    project_top_s(comb, 2);
    CHECK(comb.p.data() == std::vector<float>{0.5f, -0.9f, 0.0f});
  }
  SUBCASE("short columns unchanged") {
    SparseCombiner<float> comb(Tensor4<float>(1, 4, 1, 1, {0, 3, 0, -1}));
    const auto before = comb;
    project_top_s(comb, 2);
    CHECK(comb == before);
  }
  SUBCASE("ties go to the lower index") {
    SparseCombiner<float> comb(Tensor4<float>(1, 4, 1, 1, {0.5f, -0.5f, 0.5f, 0.1f}));
    project_top_s(comb, 2);
    CHECK(comb.p.data() == std::vector<float>{0.5f, -0.5f, 0, 0});
  }
  SUBCASE("exhaustive l0 scan and idempotence") {
    oracle::Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t s = oracle::pick(rng, 1, 3);
      SparseCombiner<float> comb(oracle::sparse_p<float>(3, 6, 3, 3, 0.8, rng));
      project_top_s(comb, s);
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t r = 0; r < 3; ++r)
          for (std::size_t c = 0; c < 3; ++c) {
            std::size_t nz = 0;
            for (std::size_t j = 0; j < 6; ++j) nz += comb.p.at(i, j, r, c) != 0.0f;
            CHECK(nz <= s);
          }
      const auto once = comb;
      project_top_s(comb, s);
      CHECK(comb == once);
    }
  }
  SUBCASE("s = 0 rejected") {
    SparseCombiner<float> comb(1, 2, 1, 1);
    CHECK_THROWS_AS(project_top_s(comb, 0), Error);
  }
}

TEST_CASE("apply_threshold") {
  SUBCASE("strict inequality") {
    SparseCombiner<float> comb(Tensor4<float>(1, 3, 1, 1, {0.1f, -0.3f, 0.2f}));
    apply_threshold(comb, 0.2);
    CHECK(comb.p.data() == std::vector<float>{0, -0.3f, 0});
    CHECK(comb.frozen_zero == std::vector<std::uint8_t>{1, 0, 1});
  }
  SUBCASE("small epsilon leaves nonzeros alone") {
    SparseCombiner<float> comb(Tensor4<float>(1, 3, 1, 1, {0.1f, -0.3f, 0.2f}));
    apply_threshold(comb, 0.01);
    CHECK(comb.p.data() == std::vector<float>{0.1f, -0.3f, 0.2f});
    CHECK(comb.frozen_zero == std::vector<std::uint8_t>{0, 0, 0});
  }
  SUBCASE("zero set never shrinks under random updates") {
    oracle::Rng rng(3);
    SparseCombiner<double> comb(oracle::sparse_p<double>(2, 5, 3, 3, 0.9, rng));
    std::normal_distribution<double> step(0.0, 0.3);
    apply_threshold(comb, 0.2);
    for (int it = 0; it < 100; ++it) {
      const auto mask = comb.frozen_zero;
      for (std::size_t e = 0; e < comb.p.size(); ++e)
        if (!comb.frozen_zero[e]) comb.p.data()[e] += step(rng);
      apply_threshold(comb, 0.2);
      for (std::size_t e = 0; e < mask.size(); ++e) {
        if (mask[e]) {
          CHECK(comb.frozen_zero[e] == 1);
          CHECK(comb.p.data()[e] == 0.0);
        }
      }
      const auto once = comb;
      apply_threshold(comb, 0.2);
      CHECK(comb == once);
    }
  }
  SUBCASE("epsilon must be positive") {
    SparseCombiner<float> comb(1, 2, 1, 1);
    CHECK_THROWS_AS(apply_threshold(comb, 0.0), Error);
  }
}

TEST_CASE("backward") {
  const auto data = to_double(halves(4, 5, {2, 6, 6}));
  auto model = cast_model<double>(init_model(small_arch(), cfg_with(SparsityMode::kThreshold)));
  TrainConfig cfg = cfg_with(SparsityMode::kThreshold);

  SUBCASE("l1 subgradient is added per entry") {
    for (auto& layer : model.layers) layer.hyper.lambda = 0.0;
    const auto plain = backward<double>(data, model, cfg);
    model.layers[0].hyper.lambda = 0.1;
    const auto reg = backward<double>(data, model, cfg);
    const auto& comb = model.layers[0].lcnn->combiner();
    for (std::size_t e = 0; e < comb.p.size(); ++e) {
      const double p = comb.p.data()[e];
      const double sgn = p > 0 ? 1.0 : (p < 0 ? -1.0 : 0.0);
      const double expect = comb.frozen_zero[e] ? 0.0 : plain.grads.layers[0].dP[e] + 0.1 * sgn;
      CHECK(reg.grads.layers[0].dP[e] == doctest::Approx(expect).epsilon(1e-12));
    }
    CHECK(reg.l1 == doctest::Approx(0.1 * l1_of_P(comb)).epsilon(1e-12));
    CHECK(reg.loss == doctest::Approx(reg.data_loss + reg.l1).epsilon(1e-12));
    CHECK(reg.loss == doctest::Approx(objective<double>(data, model)).epsilon(1e-12));
  }
  SUBCASE("pinned entries get no gradient") {
    auto& comb = model.layers[0].lcnn->combiner();
    comb.frozen_zero.assign(comb.p.size(), 0);
    comb.p.data()[3] = 0.0;
    comb.frozen_zero[3] = 1;
    const auto r = backward<double>(data, model, cfg);
    CHECK(r.grads.layers[0].dP[3] == 0.0);
  }
  SUBCASE("non-finite values name the layer") {
    auto bad = data;
    bad[0].x.data()[0] = std::numeric_limits<double>::infinity();
    try {
      backward<double>(bad, model, cfg);
      FAIL("expected a numeric failure");
    } catch (const NumericFailure& e) {
      CHECK(e.layer() == 0);
      CHECK(e.kind() == ErrorKind::kNumeric);
    }
  }
  SUBCASE("inference models are rejected") {
    convert_to_inference(model);
    CHECK_THROWS_AS(backward<double>(data, model, cfg), Error);
  }
}

TEST_CASE("train_step") {
  const auto data = halves(8, 6, {2, 6, 6});

  SUBCASE("zero learning rate changes nothing but enforcement") {
    auto cfg = cfg_with(SparsityMode::kThreshold);
    auto model = init_model(small_arch(), cfg);
    const auto before = model;
    cfg.learning_rate = 0.0;
    OptimizerState<float> st;
    train_step<float>(data, model, cfg, st);
    CHECK(model == before);
  }
  SUBCASE("loss decreases on a separable set") {
    auto cfg = cfg_with(SparsityMode::kThreshold);
    cfg.learning_rate = 0.05;
    cfg.momentum = 0.0;
    auto model = init_model(small_arch(), cfg);
    const double before = objective<float>(data, model);
    OptimizerState<float> st;
    train_step<float>(data, model, cfg, st);
    CHECK(objective<float>(data, model) < before);
  }
  SUBCASE("frozen dictionaries stay bitwise constant") {
    auto cfg = cfg_with(SparsityMode::kFixedS);
    auto model = init_model(small_arch(), cfg);
    for (auto& l : model.layers)
      if (l.lcnn) l.lcnn->dict.frozen = true;
    const auto d0 = model.layers[0].lcnn->dict;
    const auto d1 = model.layers[4].lcnn->dict;
    OptimizerState<float> st;
    for (int it = 0; it < 100; ++it) {
      train_step<float>(std::span(data).subspan(std::size_t(it % 4) * 4, 4), model, cfg, st);
      REQUIRE(model.layers[0].lcnn->dict == d0);
      REQUIRE(model.layers[4].lcnn->dict == d1);
    }
  }
  SUBCASE("regularizer shrinks entries when the data gradient vanishes") {
    auto cfg = cfg_with(SparsityMode::kThreshold);
    cfg.momentum = 0.0;
    cfg.learning_rate = 0.1;
    auto model = init_model(small_arch(), cfg);
    auto& lc = *model.layers[0].lcnn;
    std::fill(lc.dict.data.begin(), lc.dict.data.end(), 0.0f);  // S = 0, so dL/dP = 0
    model.layers[0].hyper.lambda = 0.01;
    const auto before = lc.combiner().p.data();
    OptimizerState<float> st;
    train_step<float>(data, model, cfg, st);
    const auto& after = lc.combiner().p.data();
    for (std::size_t e = 0; e < before.size(); ++e)
      if (std::abs(before[e]) > 0.1 * 0.01) CHECK(std::abs(after[e]) < std::abs(before[e]));
  }
  SUBCASE("support policy never adds nonzeros") {
    auto cfg = cfg_with(SparsityMode::kFixedS);
    auto model = init_model(small_arch(), cfg);
    UpdatePolicy pol(model.layers.size());
    for (auto& p : pol) {
      p.p = LayerPolicy::PUpdate::kSupport;
      p.enforce = false;
    }
    const auto nz0 = model.layers[0].lcnn->combiner().nonzeros();
    OptimizerState<float> st;
    for (int it = 0; it < 10; ++it) train_step<float>(data, model, cfg, st, &pol);
    CHECK(model.layers[0].lcnn->combiner().nonzeros() <= nz0);
    UpdatePolicy wrong(2);
    CHECK_THROWS_AS(train_step<float>(data, model, cfg, st, &wrong), Error);
  }
}

TEST_CASE("train is deterministic and learns") {
  const auto data = halves(20, 7, {2, 6, 6});
  auto cfg = cfg_with(SparsityMode::kThreshold);
  cfg.iterations = 60;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.05;
  auto a = init_model(small_arch(), cfg);
  auto b = a;
  std::size_t calls = 0;
  train(a, data, cfg, nullptr, [&](const IterationLog& log) {
    CHECK(log.iteration == calls++);
    CHECK(log.mean_l0 >= 0.0);
  });
  train(b, data, cfg);
  CHECK(calls == 60);
  CHECK(a == b);
  CHECK(evaluate(a, data).top1_accuracy() > 0.9);
  CHECK(mean_l0(a) <= 4.0);
  CHECK_THROWS_AS(train(a, {}, cfg), Error);
}

TEST_CASE("evaluate") {
  const auto arch = parse_layer_list("flatten,lfc:10", {1, 2, 2}, 10);
  TrainConfig cfg;
  cfg.dict_policy.kind = DictPolicy::Kind::kExplicit;
  cfg.dict_policy.sizes = {2};
  auto model = init_model(arch, cfg);
  auto& comb = model.layers[1].lcnn->combiner();
  std::fill(comb.p.data().begin(), comb.p.data().end(), 0.0f);
  std::vector<Sample<float>> data;
  oracle::Rng rng(3);
  for (std::size_t i = 0; i < 50; ++i) {
    Tensor3<float> x(1, 2, 2);
    oracle::fill_normal(x.data(), rng);
    data.push_back({x, i % 10});
  }
  const auto r = evaluate(model, data);
  CHECK(r.top1_accuracy() == doctest::Approx(0.1));
  CHECK(r.top5_accuracy() == doctest::Approx(0.5));
  CHECK(r.per_class_correct[0] == 5);
  CHECK(r.per_class_total[3] == 5);
  data[0].label = 10;
  CHECK_THROWS_AS(evaluate(model, data), Error);
}

TEST_CASE("finite differences") {
  const auto data = to_double(halves(2, 8, {2, 5, 5}));
  FdOptions opt;
  opt.step = 1e-6;

  SUBCASE("one lookup conv layer") {
    const auto arch = parse_layer_list("lconv:3:3:1:1,flatten,lfc:2", {2, 5, 5}, 2);
    auto cfg = cfg_with(SparsityMode::kThreshold);
    cfg.dict_policy.sizes = {4, 6};
    const auto model = cast_model<double>(init_model(arch, cfg));
    const auto rep = finite_diff_check(model, data, 1e-3, opt);
    CHECK(rep.passed);
    CHECK(rep.max_rel_error <= 1e-3);
    for (const auto& t : rep.tensors) CHECK(t.max_rel_error <= 1e-3);
  }
  SUBCASE("zero P coordinates are not probed") {
    const auto arch = parse_layer_list("flatten,lfc:2", {2, 5, 5}, 2);
    auto cfg = cfg_with(SparsityMode::kFixedS);
    cfg.s_max = 1;
    cfg.dict_policy.sizes = {4};
    const auto model = cast_model<double>(init_model(arch, cfg));
    opt.coords_per_tensor = 1000;
    const auto rep = finite_diff_check(model, data, 1e-3, opt);
    const auto nz = model.layers[1].lcnn->combiner().nonzeros();
    for (const auto& t : rep.tensors)
      if (t.tensor == "P") CHECK(t.probed <= nz);
    CHECK(rep.passed);
  }
  SUBCASE("dense-only model") {
    const auto arch = parse_layer_list("dconv:3:3:1:1,flatten,dfc:2", {2, 5, 5}, 2);
    const auto model = cast_model<double>(init_model(arch, TrainConfig{}));
    CHECK(finite_diff_check(model, data, 1e-3, opt).passed);
  }
}
