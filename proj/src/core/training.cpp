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

#include "lcnn/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lcnn {

void TrainConfig::validate() const {
  require(c > 0.0, ErrorKind::kConfig, "c must be > 0");
  require(lambda_prime >= 0.0, ErrorKind::kConfig, "lambda_prime must be >= 0");
  require(mode != SparsityMode::kFixedS || s_max >= 1, ErrorKind::kConfig,
          "s_max must be >= 1 in fixed_s mode");
  require(learning_rate >= 0.0, ErrorKind::kConfig, "learning_rate must be >= 0");
  require(momentum >= 0.0 && momentum < 1.0, ErrorKind::kConfig, "momentum must be in [0, 1)");
  require(dict_weight_decay >= 0.0, ErrorKind::kConfig, "dict_weight_decay must be >= 0");
  require(batch_size >= 1, ErrorKind::kConfig, "batch_size must be >= 1");
}

LayerHyper layer_hyper(const ConvGeom& geom, const TrainConfig& cfg) {
  const double fan_in = double(geom.m * geom.taps());
  const double fan_out = double(geom.n * geom.taps());
  LayerHyper h;
  h.sigma = std::sqrt(2.0 / (fan_in + fan_out));
  h.epsilon = cfg.c * h.sigma;
  h.lambda = cfg.lambda_prime * h.epsilon;
  return h;
}

namespace {

void fill_gaussian(std::vector<float>& v, double sigma, Rng& rng) {
  std::normal_distribution<double> dist(0.0, sigma);
  for (float& x : v) x = static_cast<float>(dist(rng));
}

}  // namespace

double dictionary_sigma(std::size_t m, std::size_t k) {
  return std::sqrt(2.0 / double(m + k));
}

LcnnConvLayer<float> init_layer(const ConvGeom& geom, std::size_t k, const TrainConfig& cfg,
                                Rng& rng) {
  require(k >= 1, ErrorKind::kDimension, "dictionary size must be >= 1");
  const LayerHyper h = layer_hyper(geom, cfg);
  Dictionary<float> dict(k, geom.m);
  fill_gaussian(dict.data, dictionary_sigma(geom.m, k), rng);
  SparseCombiner<float> comb(geom.n, k, geom.kh, geom.kw);
  fill_gaussian(comb.p.data(), h.sigma, rng);
  if (cfg.mode == SparsityMode::kThreshold) {
    apply_threshold(comb, h.epsilon);
  } else {
    comb.s_max = cfg.s_max;
    project_top_s(comb, cfg.s_max);
  }
  return LcnnConvLayer<float>::make(geom, std::move(dict), std::move(comb),
                                    std::vector<float>(geom.n, 0.0f));
}

DenseConvLayer<float> init_dense_layer(const ConvGeom& geom, Rng& rng) {
  const double fan = double((geom.m + geom.n) * geom.taps());
  DenseConvLayer<float> d{geom, Tensor4<float>(geom.n, geom.m, geom.kh, geom.kw),
                          std::vector<float>(geom.n, 0.0f)};
  fill_gaussian(d.w.data(), std::sqrt(2.0 / fan), rng);
  return d;
}

LcnnModel<float> init_model(const ArchSpec& arch, const TrainConfig& cfg) {
  cfg.validate();
  const auto resolved = resolve(arch);
  const auto ks = dictionary_sizes(resolved, cfg.dict_policy);
  Rng rng(cfg.seed);
  LcnnModel<float> model;
  model.arch = arch.name;
  model.input = arch.input;
  model.num_classes = arch.num_classes;
  model.sparsity = cfg.mode;
  model.s_max = cfg.s_max;
  model.c = cfg.c;
  model.lambda_prime = cfg.lambda_prime;
  std::size_t next_k = 0;
  for (const ResolvedLayer& rl : resolved) {
    Layer<float> layer;
    layer.kind = rl.spec.kind;
    layer.name = rl.spec.name;
    layer.block = rl.spec.block;
    layer.in = rl.in;
    layer.out = rl.out;
    layer.pool = rl.pool;
    if (is_lcnn(rl.spec.kind)) {
      layer.hyper = layer_hyper(*rl.geom, cfg);
      layer.lcnn = init_layer(*rl.geom, ks[next_k++], cfg, rng);
    } else if (is_dense(rl.spec.kind)) {
      layer.hyper = layer_hyper(*rl.geom, cfg);
      layer.dense = init_dense_layer(*rl.geom, rng);
    }
    model.layers.push_back(std::move(layer));
  }
  return model;
}

template <class T>
double l1_of_P(const SparseCombiner<T>& combiner) {
  double s = 0.0;
  for (const T v : combiner.p.data()) s += std::abs(double(v));
  return s;
}

template <class T>
void project_top_s(SparseCombiner<T>& combiner, std::size_t s) {
  require(s >= 1, ErrorKind::kConfig, "top-s projection needs s >= 1");
  Tensor4<T>& p = combiner.p;
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < p.filters(); ++i) {
    for (std::size_t r = 0; r < p.kh(); ++r) {
      for (std::size_t c = 0; c < p.kw(); ++c) {
        order.clear();
        for (std::size_t j = 0; j < p.channels(); ++j)
          if (p.at(i, j, r, c) != T(0)) order.push_back(j);
        if (order.size() <= s) continue;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
          return std::abs(p.at(i, a, r, c)) > std::abs(p.at(i, b, r, c));
        });
        for (std::size_t t = s; t < order.size(); ++t) p.at(i, order[t], r, c) = T(0);
      }
    }
  }
}

template <class T>
void apply_threshold(SparseCombiner<T>& combiner, double epsilon) {
  require(epsilon > 0.0, ErrorKind::kConfig, "threshold epsilon must be > 0");
  auto& data = combiner.p.data();
  if (combiner.frozen_zero.size() != data.size()) combiner.frozen_zero.assign(data.size(), 0);
  // Compared at parameter precision, so a stored value equal to epsilon is dropped.
  const T eps = static_cast<T>(epsilon);
  for (std::size_t e = 0; e < data.size(); ++e) {
    if (combiner.frozen_zero[e] || !(std::abs(data[e]) > eps)) {
      data[e] = T(0);
      combiner.frozen_zero[e] = 1;
    }
  }
}

namespace {

template <class T>
bool finite_tensor(const Tensor3<T>& t) {
  return all_finite(std::span<const T>(t.data()));
}

// First layer whose output is non-finite for this trace.
template <class T>
std::size_t first_bad_layer(const Trace<T>& trace) {
  for (std::size_t l = 1; l < trace.inputs.size(); ++l)
    if (!finite_tensor(trace.inputs[l])) return l - 1;
  if (!finite_tensor(trace.output)) return trace.inputs.size() - 1;
  return NumericFailure::npos;
}

template <class T>
double l1_term(const LcnnModel<T>& model) {
  double s = 0.0;
  for (const auto& layer : model.layers)
    if (layer.lcnn && layer.lcnn->mode() == LayerMode::kTraining)
      s += layer.hyper.lambda * l1_of_P(layer.lcnn->combiner());
  return s;
}

template <class T>
T sign(T v) {
  return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0));
}

}  // namespace

template <class T>
BatchResult<T> backward(std::span<const Sample<T>> batch, const LcnnModel<T>& model,
                        const TrainConfig& cfg) {
  require(model.training_mode(), ErrorKind::kMode,
          "backward needs a training-mode model; convert it first");
  require(!batch.empty(), ErrorKind::kData, "empty batch");
  const Executor<T> exec(model, cfg.route);
  GradAccumulator<T> acc = exec.make_accumulator();
  BatchResult<T> out;
  Trace<T> trace;
  double total = 0.0;
  for (const Sample<T>& s : batch) {
    const Tensor3<T> logits = exec.forward(s.x, &trace);
    const LossResult<T> lr = softmax_cross_entropy(logits, s.label);
    if (!std::isfinite(double(lr.loss))) {
      const std::size_t bad = first_bad_layer(trace);
      throw NumericFailure(bad, bad == NumericFailure::npos
                                    ? std::string("loss is not finite")
                                    : "non-finite output at layer " + std::to_string(bad) +
                                          " ('" + model.layers[bad].name + "')");
    }
    total += double(lr.loss);
    if (argmax_class(logits) == s.label) ++out.correct;
    exec.backward(trace, lr.grad, acc);
  }
  const T scale = T(1) / static_cast<T>(batch.size());
  out.grads = exec.finalize(std::move(acc), scale);
  out.data_loss = total / double(batch.size());
  out.l1 = l1_term(model);
  out.loss = out.data_loss + out.l1;

  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const Layer<T>& layer = model.layers[l];
    LayerGrads<T>& g = out.grads.layers[l];
    if (layer.lcnn) {
      const auto& comb = layer.lcnn->combiner();
      const auto& p = comb.p.data();
      const T lambda = static_cast<T>(layer.hyper.lambda);
      const bool masked = comb.frozen_zero.size() == p.size();
      for (std::size_t e = 0; e < p.size(); ++e) {
        g.dP[e] += lambda * sign(p[e]);
        if (masked && comb.frozen_zero[e]) g.dP[e] = T(0);
      }
    }
    for (const auto* v : {&g.dP, &g.dD, &g.dW, &g.dBias})
      if (!all_finite(std::span<const T>(*v)))
        throw NumericFailure(l, "non-finite gradient at layer " + std::to_string(l) + " ('" +
                                    layer.name + "')");
  }
  return out;
}

template <class T>
double objective(std::span<const Sample<T>> batch, const LcnnModel<T>& model) {
  const Executor<T> exec(model, Route::kSparse);
  double total = 0.0;
  for (const Sample<T>& s : batch)
    total += double(softmax_cross_entropy(exec.forward(s.x), s.label).loss);
  return total / double(batch.size()) + l1_term(model);
}

namespace {

template <class T>
void momentum_update(std::vector<T>& param, std::vector<T>& vel, const std::vector<T>& grad,
                     double lr, double mu, const std::vector<std::uint8_t>* skip) {
  if (vel.size() != param.size()) vel.assign(param.size(), T(0));
  const T tlr = static_cast<T>(lr), tmu = static_cast<T>(mu);
  for (std::size_t e = 0; e < param.size(); ++e) {
    if (skip && (*skip)[e]) {
      vel[e] = T(0);
      continue;
    }
    vel[e] = tmu * vel[e] - tlr * grad[e];
    param[e] += vel[e];
  }
}

}  // namespace

template <class T>
StepResult train_step(std::span<const Sample<T>> batch, LcnnModel<T>& model,
                      const TrainConfig& cfg, OptimizerState<T>& state,
                      const UpdatePolicy* policy) {
  require(!policy || policy->size() == model.layers.size(), ErrorKind::kStructure,
          "update policy does not match the model");
  BatchResult<T> r = backward(batch, model, cfg);
  if (state.velocity.size() != model.layers.size()) state.velocity.assign(model.layers.size(), {});
  const LayerPolicy all;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    Layer<T>& layer = model.layers[l];
    const LayerPolicy& pol = policy ? (*policy)[l] : all;
    LayerGrads<T>& g = r.grads.layers[l];
    LayerGrads<T>& v = state.velocity[l];
    const double lr = cfg.learning_rate * pol.lr_scale;
    if (layer.lcnn) {
      auto& lc = *layer.lcnn;
      auto& comb = lc.combiner();
      auto& p = comb.p.data();
      if (pol.p != LayerPolicy::PUpdate::kNone) {
        std::vector<std::uint8_t> skip(p.size(), 0);
        if (comb.frozen_zero.size() == p.size()) skip = comb.frozen_zero;
        if (pol.p == LayerPolicy::PUpdate::kSupport)
          for (std::size_t e = 0; e < p.size(); ++e)
            if (p[e] == T(0)) skip[e] = 1;
        momentum_update(p, v.dP, g.dP, lr, cfg.momentum, &skip);
      }
      if (!lc.dict.frozen && pol.update_dict) {
        if (cfg.dict_weight_decay > 0.0)
          for (std::size_t e = 0; e < g.dD.size(); ++e)
            g.dD[e] += static_cast<T>(cfg.dict_weight_decay) * lc.dict.data[e];
        momentum_update(lc.dict.data, v.dD, g.dD, lr, cfg.momentum, nullptr);
      }
      if (pol.update_bias) momentum_update(lc.bias, v.dBias, g.dBias, lr, cfg.momentum, nullptr);
      if (pol.enforce) {
        if (cfg.mode == SparsityMode::kFixedS) {
          project_top_s(comb, cfg.s_max);
        } else {
          apply_threshold(comb, layer.hyper.epsilon);
          if (v.dP.size() == p.size())
            for (std::size_t e = 0; e < p.size(); ++e)
              if (comb.frozen_zero[e]) v.dP[e] = T(0);
        }
      }
    } else if (layer.dense) {
      if (pol.update_dense)
        momentum_update(layer.dense->w.data(), v.dW, g.dW, lr, cfg.momentum, nullptr);
      if (pol.update_bias)
        momentum_update(layer.dense->bias, v.dBias, g.dBias, lr, cfg.momentum, nullptr);
    }
  }
  StepResult out;
  out.loss = r.loss;
  out.l1 = r.l1;
  out.accuracy = double(r.correct) / double(batch.size());
  return out;
}

template <class T>
double mean_l0(const LcnnModel<T>& model) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& layer : model.layers) {
    if (!layer.lcnn || layer.lcnn->mode() != LayerMode::kTraining) continue;
    sum += layer.lcnn->combiner().mean_l0();
    ++count;
  }
  return count ? sum / double(count) : 0.0;
}

StepResult train(LcnnModel<float>& model, const std::vector<Sample<float>>& data,
                 const TrainConfig& cfg, const UpdatePolicy* policy,
                 const std::function<void(const IterationLog&)>& on_step) {
  cfg.validate();
  require(!data.empty(), ErrorKind::kData, "training set is empty");
  Rng rng(cfg.seed ^ 0x5851f42d4c957f2dULL);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t pos = order.size();
  const std::size_t bs = std::min(cfg.batch_size, data.size());
  OptimizerState<float> state;
  StepResult last;
  std::vector<Sample<float>> batch;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    batch.clear();
    while (batch.size() < bs) {
      if (pos == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        pos = 0;
      }
      batch.push_back(data[order[pos++]]);
    }
    last = train_step<float>(batch, model, cfg, state, policy);
    if (on_step) on_step(IterationLog{it, last, mean_l0(model)});
  }
  return last;
}

template <class T>
EvalResult evaluate(const LcnnModel<T>& model, const std::vector<Sample<T>>& data) {
  const Executor<T> exec(model, Route::kAuto);
  EvalResult r;
  r.per_class_total.assign(model.num_classes, 0);
  r.per_class_correct.assign(model.num_classes, 0);
  for (const Sample<T>& s : data) {
    require(s.label < model.num_classes, ErrorKind::kData,
            "label " + std::to_string(s.label) + " out of range");
    const auto ranked = ranked_classes(exec.forward(s.x));
    ++r.samples;
    ++r.per_class_total[s.label];
    if (ranked[0] == s.label) {
      ++r.top1;
      ++r.per_class_correct[s.label];
    }
    const std::size_t top = std::min<std::size_t>(5, ranked.size());
    if (std::find(ranked.begin(), ranked.begin() + top, s.label) != ranked.begin() + top)
      ++r.top5;
  }
  return r;
}

namespace {

struct Probe {
  std::size_t layer;
  std::string tensor;
  std::vector<double>* values;
  const std::vector<double>* grad;
  std::vector<std::size_t> coords;
};

}  // namespace

FdReport finite_diff_check(const LcnnModel<double>& model,
                           std::span<const Sample<double>> batch, double tolerance,
                           const FdOptions& options) {
  TrainConfig cfg;
  cfg.mode = model.sparsity;
  cfg.route = options.route;
  const BatchResult<double> r = backward(batch, model, cfg);
  LcnnModel<double> work = model;
  Rng rng(options.seed);

  auto pick = [&](const std::vector<double>& values, bool skip_small) {
    std::vector<std::size_t> eligible;
    for (std::size_t e = 0; e < values.size(); ++e)
      if (!skip_small || std::abs(values[e]) >= options.skip_below) eligible.push_back(e);
    std::shuffle(eligible.begin(), eligible.end(), rng);
    if (eligible.size() > options.coords_per_tensor) eligible.resize(options.coords_per_tensor);
    std::sort(eligible.begin(), eligible.end());
    return eligible;
  };

  std::vector<Probe> probes;
  for (std::size_t l = 0; l < work.layers.size(); ++l) {
    auto& layer = work.layers[l];
    const auto& g = r.grads.layers[l];
    if (layer.lcnn) {
      auto& p = layer.lcnn->combiner().p.data();
      probes.push_back({l, "P", &p, &g.dP, pick(p, true)});
      probes.push_back({l, "D", &layer.lcnn->dict.data, &g.dD, pick(layer.lcnn->dict.data, false)});
      probes.push_back({l, "bias", &layer.lcnn->bias, &g.dBias, pick(layer.lcnn->bias, false)});
    } else if (layer.dense) {
      probes.push_back({l, "W", &layer.dense->w.data(), &g.dW, pick(layer.dense->w.data(), false)});
      probes.push_back({l, "bias", &layer.dense->bias, &g.dBias, pick(layer.dense->bias, false)});
    }
  }

  FdReport report;
  report.tolerance = tolerance;
  for (Probe& pr : probes) {
    FdTensorReport tr{pr.layer, pr.tensor, pr.coords.size(), 0.0};
    for (const std::size_t e : pr.coords) {
      const double orig = (*pr.values)[e];
      (*pr.values)[e] = orig + options.step;
      const double up = objective<double>(batch, work);
      (*pr.values)[e] = orig - options.step;
      const double down = objective<double>(batch, work);
      (*pr.values)[e] = orig;
      const double numeric = (up - down) / (2.0 * options.step);
      const double analytic = (*pr.grad)[e];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      tr.max_rel_error = std::max(tr.max_rel_error, std::abs(analytic - numeric) / denom);
    }
    report.max_rel_error = std::max(report.max_rel_error, tr.max_rel_error);
    report.tensors.push_back(std::move(tr));
  }
  report.passed = report.max_rel_error <= tolerance;
  return report;
}

#define LCNN_INSTANTIATE(T)                                                                  \
  template double l1_of_P(const SparseCombiner<T>&);                                         \
  template void project_top_s(SparseCombiner<T>&, std::size_t);                              \
  template void apply_threshold(SparseCombiner<T>&, double);                                 \
  template BatchResult<T> backward(std::span<const Sample<T>>, const LcnnModel<T>&,          \
                                   const TrainConfig&);                                      \
  template double objective(std::span<const Sample<T>>, const LcnnModel<T>&);                \
  template StepResult train_step(std::span<const Sample<T>>, LcnnModel<T>&,                  \
                                 const TrainConfig&, OptimizerState<T>&, const UpdatePolicy*); \
  template double mean_l0(const LcnnModel<T>&);                                              \
  template EvalResult evaluate(const LcnnModel<T>&, const std::vector<Sample<T>>&);

LCNN_INSTANTIATE(float)
LCNN_INSTANTIATE(double)
#undef LCNN_INSTANTIATE

}  // namespace lcnn
