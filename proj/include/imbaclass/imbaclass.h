/* Copyright 2026 The imbaclass Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef IMBACLASS_IMBACLASS_H_
#define IMBACLASS_IMBACLASS_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define IMBC_API __declspec(dllexport)
#else
#define IMBC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum imbc_status {
  IMBC_OK = 0,
  IMBC_INVALID_ARGUMENT = 1,
  IMBC_NOT_FOUND = 2,
  IMBC_CAPACITY = 3,
  IMBC_IO_ERROR = 4,
  IMBC_RUNTIME_ERROR = 5,
} imbc_status;

typedef enum imbc_loss_family {
  IMBC_LOSS_CROSS_ENTROPY = 0,
  IMBC_LOSS_FOCAL = 1,
} imbc_loss_family;

typedef struct imbc_dataset imbc_dataset;

/* Message of the last failed call on this thread; "" after a success. */
IMBC_API const char* imbc_last_error(void);
IMBC_API const char* imbc_version(void);
/* trace, debug, info, warn, error, critical, off. */
IMBC_API imbc_status imbc_set_log_level(const char* level);
/* Frees strings returned through char** out-parameters. */
IMBC_API void imbc_string_free(char* s);

/* Mean loss over n rows of a row-major n x num_classes probability matrix. */
IMBC_API imbc_status imbc_loss(const double* probabilities, const int* labels, size_t n,
                               int num_classes, imbc_loss_family family, double alpha,
                               double gamma, double* mean_out);
/* d(mean loss)/d(logits) through softmax; grad_out has n * num_classes entries. */
IMBC_API imbc_status imbc_loss_gradient(const double* logits, const int* labels, size_t n,
                                        int num_classes, imbc_loss_family family, double alpha,
                                        double gamma, double* grad_out);
IMBC_API imbc_status imbc_imbalance_ratio(const int64_t* class_counts, size_t num_classes,
                                          double* rho_out);
/* NaN when one of the two classes is absent. */
IMBC_API imbc_status imbc_auroc(const double* scores, const uint8_t* positive, size_t n,
                                double* auroc_out);
IMBC_API imbc_status imbc_relative_improvement(double metric_focal, double metric_baseline,
                                               double* percent_out);

IMBC_API imbc_status imbc_dataset_load(const char* dir, imbc_dataset** out);
IMBC_API imbc_status imbc_dataset_save(const imbc_dataset* ds, const char* dir);
IMBC_API void imbc_dataset_free(imbc_dataset* ds);
IMBC_API size_t imbc_dataset_size(const imbc_dataset* ds);
IMBC_API int imbc_dataset_num_classes(const imbc_dataset* ds);
/* Writes min(capacity, num_classes) counts. */
IMBC_API imbc_status imbc_dataset_class_counts(const imbc_dataset* ds, int64_t* counts,
                                               size_t capacity);

IMBC_API imbc_status imbc_synth_dataset(const int64_t* class_counts, size_t num_classes,
                                        int image_size, double noise_std, uint64_t seed,
                                        imbc_dataset** out);
IMBC_API imbc_status imbc_undersample(const imbc_dataset* ds, uint64_t seed, imbc_dataset** out);
IMBC_API imbc_status imbc_oversample(const imbc_dataset* ds, double rotation_degrees,
                                     int horizontal_flip, int vertical_flip, uint64_t seed,
                                     imbc_dataset** out);

typedef struct imbc_segment_options {
  int diameter;
  double source_cell_diameter; /* 0: no upscaling */
  int clahe_tile;
  double clip_limit;
  double min_radius;
  double max_radius;
  double min_center_distance;
  double accumulator_threshold;
} imbc_segment_options;

IMBC_API void imbc_segment_options_default(imbc_segment_options* opts);
/* Segments every PNG/PGM directly inside input_dir (sorted by name) into
   <stem>_cell<k>.png crops plus detections.csv in output_dir. Nothing is
   written when the options or inputs are invalid. */
IMBC_API imbc_status imbc_segment_directory(const char* input_dir, const char* output_dir,
                                            const imbc_segment_options* opts,
                                            size_t* cells_out);

/* Runs an experiment plan (JSON file). When override_seed is nonzero, seed
   replaces the plan's master seed. Output is written only after every run
   has finished. */
IMBC_API imbc_status imbc_run_plan_file(const char* plan_path, const char* out_dir, int jobs,
                                        int override_seed, uint64_t seed);
/* Markdown summary of a results.csv file (or a directory holding one). */
IMBC_API imbc_status imbc_render_report(const char* results_path, char** markdown_out);

#ifdef __cplusplus
}
#endif

#endif  /* IMBACLASS_IMBACLASS_H_ */
