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

#include "lcnn/lcnn.h"

#include <iostream>
#include <string>

#include "lcnn/executor.hpp"
#include "lcnn/experiments.hpp"
#include "lcnn/serialize.hpp"

struct lcnn_model {
  lcnn::LcnnModel<float> model;
};

namespace {

thread_local std::string g_last_error;

lcnn_status status_for(lcnn::ErrorKind kind) {
  using lcnn::ErrorKind;
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kTransfer:
    case ErrorKind::kContract:
    case ErrorKind::kStructure: return LCNN_ERR_CONFIG;
    case ErrorKind::kData: return LCNN_ERR_DATA;
    case ErrorKind::kNumeric: return LCNN_ERR_NUMERIC;
    case ErrorKind::kMode: return LCNN_ERR_MODE;
    case ErrorKind::kFormat: return LCNN_ERR_FORMAT;
    case ErrorKind::kIo: return LCNN_ERR_IO;
    case ErrorKind::kDimension:
    case ErrorKind::kBounds:
    case ErrorKind::kUnsupportedGeometry: return LCNN_ERR_DIMENSION;
  }
  return LCNN_ERR_INTERNAL;
}

lcnn_status set_error(lcnn_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <class F>
lcnn_status guarded(F&& f) {
  try {
    return f();
  } catch (const lcnn::Error& e) {
    return set_error(status_for(e.kind()), e.what());
  } catch (const std::exception& e) {
    return set_error(LCNN_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(LCNN_ERR_INTERNAL, "unknown error");
  }
}

}  // namespace

extern "C" {

const char* lcnn_last_error(void) { return g_last_error.c_str(); }

const char* lcnn_status_string(lcnn_status status) {
  switch (status) {
    case LCNN_OK: return "ok";
    case LCNN_ERR_ARGUMENT: return "invalid argument";
    case LCNN_ERR_CONFIG: return "configuration error";
    case LCNN_ERR_DATA: return "data error";
    case LCNN_ERR_NUMERIC: return "numeric failure";
    case LCNN_ERR_MODE: return "wrong model form";
    case LCNN_ERR_FORMAT: return "malformed model file";
    case LCNN_ERR_IO: return "i/o error";
    case LCNN_ERR_DIMENSION: return "dimension error";
    case LCNN_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

lcnn_status lcnn_model_load(const char* path, lcnn_model** out) {
  if (!path || !out) return set_error(LCNN_ERR_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    *out = new lcnn_model{lcnn::load_model(path)};
    return LCNN_OK;
  });
}

lcnn_status lcnn_model_save(const lcnn_model* model, const char* path) {
  if (!model || !path) return set_error(LCNN_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    lcnn::save_model(model->model, path);
    return LCNN_OK;
  });
}

void lcnn_model_free(lcnn_model* model) { delete model; }

lcnn_status lcnn_model_info(const lcnn_model* model, size_t* channels, size_t* width,
                            size_t* height, size_t* num_classes, int* inference) {
  if (!model) return set_error(LCNN_ERR_ARGUMENT, "null model");
  const auto& m = model->model;
  if (channels) *channels = m.input.channels;
  if (width) *width = m.input.width;
  if (height) *height = m.input.height;
  if (num_classes) *num_classes = m.num_classes;
  if (inference) *inference = m.inference_mode() ? 1 : 0;
  return LCNN_OK;
}

lcnn_status lcnn_model_convert(lcnn_model* model) {
  if (!model) return set_error(LCNN_ERR_ARGUMENT, "null model");
  return guarded([&] {
    lcnn::convert_to_inference(model->model);
    return LCNN_OK;
  });
}

lcnn_status lcnn_model_forward(const lcnn_model* model, const float* input, size_t input_len,
                               float* logits, size_t logits_len) {
  if (!model || !input || !logits) return set_error(LCNN_ERR_ARGUMENT, "null argument");
  const auto& m = model->model;
  if (input_len != m.input.size())
    return set_error(LCNN_ERR_ARGUMENT, "input length " + std::to_string(input_len) +
                                            " != " + std::to_string(m.input.size()));
  if (logits_len != m.num_classes)
    return set_error(LCNN_ERR_ARGUMENT, "logits length " + std::to_string(logits_len) +
                                            " != " + std::to_string(m.num_classes));
  return guarded([&] {
    lcnn::Tensor3<float> x(m.input.channels, m.input.width, m.input.height,
                           std::vector<float>(input, input + input_len));
    const lcnn::Executor<float> exec(m);
    const auto y = exec.forward(x);
    std::copy(y.data().begin(), y.data().end(), logits);
    return LCNN_OK;
  });
}

int lcnn_run_command(const char* command, const lcnn_command_args* args) {
  if (!command || !args) {
    std::cerr << "error: missing command\n";
    return 2;
  }
  lcnn::CommandOptions o;
  if (args->config) o.config = args->config;
  if (args->model) o.model = args->model;
  if (args->out) o.out = args->out;
  if (args->csv) o.csv = args->csv;
  if (args->has_seed) o.seed = args->seed;
  return lcnn::run_command(command, o, std::cout, std::cerr);
}

}  // extern "C"
