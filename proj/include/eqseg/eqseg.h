// Copyright 2026 The eqseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EQSEG_EQSEG_H_
#define EQSEG_EQSEG_H_

#include <stddef.h>
#include <stdint.h>

#if defined(EQSEG_BUILDING_LIBRARY)
#define EQSEG_API __attribute__((visibility("default")))
#else
#define EQSEG_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum eqseg_status {
  EQSEG_OK = 0,
  EQSEG_ERR_VALIDATION = 1,
  EQSEG_ERR_GEOMETRY = 2,
  EQSEG_ERR_INDEX = 3,
  EQSEG_ERR_LOOKUP = 4,
  EQSEG_ERR_INTEGRITY = 5,
  EQSEG_ERR_IO = 6,
  EQSEG_ERR_FORMAT = 7,
  EQSEG_ERR_CONFIG = 8,
  EQSEG_ERR_NUMERIC = 9,
  EQSEG_ERR_INVALID_ARGUMENT = 10,
  EQSEG_ERR_INTERNAL = 99
} eqseg_status;

typedef struct eqseg_model eqseg_model;

typedef void (*eqseg_log_fn)(const char* line, void* user);

// Message for the last failing call on this thread; empty after success.
EQSEG_API const char* eqseg_last_error(void);
EQSEG_API const char* eqseg_status_name(eqseg_status status);

// Frees strings returned through char** out-parameters.
EQSEG_API void eqseg_string_free(char* s);

EQSEG_API eqseg_status eqseg_generate_synthetic(const char* dir, int n,
                                                int size, uint64_t seed);

// Runs training as described by a key = value config file. `log` may be
// NULL; it receives every log line as it is produced.
EQSEG_API eqseg_status eqseg_train(const char* config_path, eqseg_log_fn log,
                                   void* user);

EQSEG_API eqseg_status eqseg_model_load(const char* checkpoint_path,
                                        eqseg_model** out);
EQSEG_API void eqseg_model_free(eqseg_model* model);

EQSEG_API eqseg_status eqseg_model_param_count(const eqseg_model* model,
                                               int64_t* out);
// 1 for the equivariant variant, 0 for the plain CNN.
EQSEG_API eqseg_status eqseg_model_is_equivariant(const eqseg_model* model,
                                                  int* out);
EQSEG_API eqseg_status eqseg_model_image_size(const eqseg_model* model,
                                              int* out);
// Config and metrics text stored in the checkpoint.
EQSEG_API eqseg_status eqseg_model_describe(const eqseg_model* model,
                                            char** config_text,
                                            char** metrics_text);

// Evaluates one split ("train", "val", "test" or "all") of a dataset.
// rotation: "none", "quarter" or "arbitrary"; aggregation: "per_sample" or
// "pooled". Outputs a human-readable table and key = value text; either
// pointer may be NULL.
EQSEG_API eqseg_status eqseg_evaluate(eqseg_model* model, const char* data_dir,
                                      const char* split, const char* rotation,
                                      uint64_t seed, const char* aggregation,
                                      char** table, char** key_values);

// Max-abs commutation error of the segmentation logits and max-abs change of
// the class logits for each angle, measured on n images drawn from data_dir
// (or uniform noise when data_dir is NULL).
EQSEG_API eqseg_status eqseg_check_equivariance(
    eqseg_model* model, const char* data_dir, const double* angles,
    size_t n_angles, int n_images, uint64_t seed, double* seg_errors,
    double* class_errors);

// Predicts one image. image_chw holds 3*size*size floats in [0,1];
// mask_out receives size*size bytes of 0/1; class_out and probs_out (4
// floats) may be NULL.
EQSEG_API eqseg_status eqseg_predict(eqseg_model* model, const float* image_chw,
                                     int size, uint8_t* mask_out,
                                     int* class_out, float* probs_out);

// PNG in, PNG out: writes the blue prediction overlay (with a red boundary
// of truth_png when it is not NULL) and the binary 0/255 mask. class_out
// may be NULL.
EQSEG_API eqseg_status eqseg_predict_png(eqseg_model* model,
                                         const char* image_png,
                                         const char* truth_png,
                                         const char* overlay_out,
                                         const char* mask_out, int* class_out);

EQSEG_API const char* eqseg_class_name(int id);

#ifdef __cplusplus
}  // extern "C"
#endif

#endif  // EQSEG_EQSEG_H_
