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

#ifndef LCNN_LCNN_H_
#define LCNN_LCNN_H_

/* C interface to the lookup-based CNN engine.
 *
 * Models are opaque handles. Every call returns an lcnn_status; on failure
 * lcnn_last_error() describes the cause (thread-local, valid until the next
 * failing call on the same thread). */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define LCNN_API __declspec(dllexport)
#else
#define LCNN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lcnn_status {
  LCNN_OK = 0,
  LCNN_ERR_ARGUMENT = 1,  /* null pointer or bad buffer size */
  LCNN_ERR_CONFIG = 2,
  LCNN_ERR_DATA = 3,
  LCNN_ERR_NUMERIC = 4,
  LCNN_ERR_MODE = 5,      /* wrong training/inference form */
  LCNN_ERR_FORMAT = 6,    /* malformed model file */
  LCNN_ERR_IO = 7,
  LCNN_ERR_DIMENSION = 8,
  LCNN_ERR_INTERNAL = 9
} lcnn_status;

typedef struct lcnn_model lcnn_model;

LCNN_API const char* lcnn_last_error(void);
LCNN_API const char* lcnn_status_string(lcnn_status status);

LCNN_API lcnn_status lcnn_model_load(const char* path, lcnn_model** out);
LCNN_API lcnn_status lcnn_model_save(const lcnn_model* model, const char* path);
LCNN_API void lcnn_model_free(lcnn_model* model);

/* Input shape (channels, width, height), number of classes and whether every
 * lookup layer holds index/coefficient tables. Any out pointer may be null. */
LCNN_API lcnn_status lcnn_model_info(const lcnn_model* model, size_t* channels, size_t* width,
                                     size_t* height, size_t* num_classes, int* inference);

/* Converts the training form to lookup tables in place. */
LCNN_API lcnn_status lcnn_model_convert(lcnn_model* model);

/* input: channels*width*height floats, channel-major then row-major.
 * logits: num_classes floats. */
LCNN_API lcnn_status lcnn_model_forward(const lcnn_model* model, const float* input,
                                        size_t input_len, float* logits, size_t logits_len);

typedef struct lcnn_command_args {
  const char* config; /* may be null */
  const char* model;
  const char* out;
  const char* csv;
  uint64_t seed;
  int has_seed;
} lcnn_command_args;

/* Runs train|eval|convert|fewshot|transfer|bench. Output goes to stdout,
 * errors to stderr. Returns the process exit code (0, 2, 3 or 4). */
LCNN_API int lcnn_run_command(const char* command, const lcnn_command_args* args);

#ifdef __cplusplus
}
#endif

#endif /* LCNN_LCNN_H_ */
