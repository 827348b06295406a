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

#include "imbaclass/imbaclass.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "imbaclass/dataset.hpp"
#include "imbaclass/error.hpp"
#include "imbaclass/experiment.hpp"
#include "imbaclass/image.hpp"
#include "imbaclass/imgproc.hpp"
#include "imbaclass/log.hpp"
#include "imbaclass/losses.hpp"
#include "imbaclass/metrics.hpp"
#include "imbaclass/sampling.hpp"
#include "imbaclass/synthgen.hpp"

struct imbc_dataset {
  imbaclass::LabeledDataset data;
};

namespace {

namespace fs = std::filesystem;
using namespace imbaclass;

thread_local std::string last_error;

template <class F>
imbc_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return IMBC_OK;
  } catch (const InvalidArgument& e) {
    last_error = e.what();
    return IMBC_INVALID_ARGUMENT;
  } catch (const NotFound& e) {
    last_error = e.what();
    return IMBC_NOT_FOUND;
  } catch (const CapacityError& e) {
    last_error = e.what();
    return IMBC_CAPACITY;
  } catch (const IoError& e) {
    last_error = e.what();
    return IMBC_IO_ERROR;
  } catch (const fs::filesystem_error& e) {
    last_error = e.what();
    return IMBC_IO_ERROR;
  } catch (const std::exception& e) {
    last_error = e.what();
    return IMBC_RUNTIME_ERROR;
  } catch (...) {
    last_error = "unknown error";
    return IMBC_RUNTIME_ERROR;
  }
}

void require_pointer(const void* p, const char* name) {
  if (p == nullptr) throw InvalidArgument(std::string(name) + " must not be null");
}

LossConfig make_loss(imbc_loss_family family, double alpha, double gamma) {
  switch (family) {
    case IMBC_LOSS_CROSS_ENTROPY: return LossConfig::cross_entropy();
    case IMBC_LOSS_FOCAL: return LossConfig::focal(alpha, gamma);
  }
  throw InvalidArgument("unknown loss family");
}

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".pgm";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

imbc_dataset* wrap(LabeledDataset data) { return new imbc_dataset{std::move(data)}; }

}  // namespace

extern "C" {

const char* imbc_last_error(void) { return last_error.c_str(); }

const char* imbc_version(void) { return "0.1.0"; }

imbc_status imbc_set_log_level(const char* level) {
  return guarded([&] {
    require_pointer(level, "level");
    set_log_level(level);
  });
}

void imbc_string_free(char* s) { delete[] s; }

imbc_status imbc_loss(const double* probabilities, const int* labels, size_t n, int num_classes,
                      imbc_loss_family family, double alpha, double gamma, double* mean_out) {
  return guarded([&] {
    require_pointer(mean_out, "mean_out");
    IMBACLASS_REQUIRE(num_classes >= 1, "num_classes must be >= 1");
    IMBACLASS_REQUIRE(n == 0 || (probabilities && labels), "probabilities and labels must not be null");
    PredictionBatch batch;
    batch.num_classes = num_classes;
    if (n > 0) {
      batch.probabilities.assign(probabilities, probabilities + n * static_cast<size_t>(num_classes));
      batch.labels.assign(labels, labels + n);
    }
    *mean_out = evaluate_loss(batch, make_loss(family, alpha, gamma)).mean;
  });
}

imbc_status imbc_loss_gradient(const double* logits, const int* labels, size_t n, int num_classes,
                               imbc_loss_family family, double alpha, double gamma,
                               double* grad_out) {
  return guarded([&] {
    IMBACLASS_REQUIRE(num_classes >= 1, "num_classes must be >= 1");
    IMBACLASS_REQUIRE(n >= 1, "gradient of an empty batch");
    require_pointer(logits, "logits");
    require_pointer(labels, "labels");
    require_pointer(grad_out, "grad_out");
    const size_t total = n * static_cast<size_t>(num_classes);
    const auto g = loss_gradient(std::span<const double>(logits, total), std::span<const int>(labels, n),
                                 num_classes, make_loss(family, alpha, gamma));
    std::copy(g.begin(), g.end(), grad_out);
  });
}

imbc_status imbc_imbalance_ratio(const int64_t* class_counts, size_t num_classes, double* rho_out) {
  return guarded([&] {
    require_pointer(class_counts, "class_counts");
    require_pointer(rho_out, "rho_out");
    *rho_out = imbalance_ratio(std::span<const std::int64_t>(class_counts, num_classes));
  });
}

imbc_status imbc_auroc(const double* scores, const uint8_t* positive, size_t n, double* auroc_out) {
  return guarded([&] {
    require_pointer(auroc_out, "auroc_out");
    IMBACLASS_REQUIRE(n == 0 || (scores && positive), "scores and positive must not be null");
    *auroc_out = auroc(std::span<const double>(scores, n), std::span<const std::uint8_t>(positive, n));
  });
}

imbc_status imbc_relative_improvement(double metric_focal, double metric_baseline,
                                      double* percent_out) {
  return guarded([&] {
    require_pointer(percent_out, "percent_out");
    *percent_out = relative_improvement(metric_focal, metric_baseline);
  });
}

imbc_status imbc_dataset_load(const char* dir, imbc_dataset** out) {
  return guarded([&] {
    require_pointer(dir, "dir");
    require_pointer(out, "out");
    *out = wrap(load_dataset(dir));
  });
}

imbc_status imbc_dataset_save(const imbc_dataset* ds, const char* dir) {
  return guarded([&] {
    require_pointer(ds, "dataset");
    require_pointer(dir, "dir");
    save_dataset(ds->data, dir);
  });
}

void imbc_dataset_free(imbc_dataset* ds) { delete ds; }

size_t imbc_dataset_size(const imbc_dataset* ds) { return ds ? ds->data.size() : 0; }

int imbc_dataset_num_classes(const imbc_dataset* ds) { return ds ? ds->data.num_classes : 0; }

imbc_status imbc_dataset_class_counts(const imbc_dataset* ds, int64_t* counts, size_t capacity) {
  return guarded([&] {
    require_pointer(ds, "dataset");
    IMBACLASS_REQUIRE(capacity == 0 || counts, "counts must not be null");
    const auto c = ds->data.class_counts();
    std::copy_n(c.begin(), std::min(capacity, c.size()), counts);
  });
}

imbc_status imbc_synth_dataset(const int64_t* class_counts, size_t num_classes, int image_size,
                               double noise_std, uint64_t seed, imbc_dataset** out) {
  return guarded([&] {
    require_pointer(class_counts, "class_counts");
    require_pointer(out, "out");
    SynthConfig cfg;
    cfg.image_size = image_size;
    cfg.class_counts.assign(class_counts, class_counts + num_classes);
    cfg.noise_std = noise_std;
    cfg.seed = seed;
    *out = wrap(generate_dataset(cfg));
  });
}

imbc_status imbc_undersample(const imbc_dataset* ds, uint64_t seed, imbc_dataset** out) {
  return guarded([&] {
    require_pointer(ds, "dataset");
    require_pointer(out, "out");
    *out = wrap(undersample(ds->data, seed));
  });
}

imbc_status imbc_oversample(const imbc_dataset* ds, double rotation_degrees, int horizontal_flip,
                            int vertical_flip, uint64_t seed, imbc_dataset** out) {
  return guarded([&] {
    require_pointer(ds, "dataset");
    require_pointer(out, "out");
    AugmentationConfig aug;
    aug.rotation_degrees = rotation_degrees;
    aug.horizontal_flip = horizontal_flip != 0;
    aug.vertical_flip = vertical_flip != 0;
    aug.seed = seed;
    *out = wrap(oversample(ds->data, aug));
  });
}

void imbc_segment_options_default(imbc_segment_options* opts) {
  if (!opts) return;
  const SegmentationConfig d;
  opts->diameter = d.expected_cell_diameter;
  opts->source_cell_diameter = d.source_cell_diameter;
  opts->clahe_tile = d.clahe_tile;
  opts->clip_limit = d.clahe_clip_limit;
  opts->min_radius = d.hough_min_radius;
  opts->max_radius = d.hough_max_radius;
  opts->min_center_distance = d.hough_min_center_distance;
  opts->accumulator_threshold = d.hough_accumulator_threshold;
}

imbc_status imbc_segment_directory(const char* input_dir, const char* output_dir,
                                   const imbc_segment_options* opts, size_t* cells_out) {
  return guarded([&] {
    require_pointer(input_dir, "input_dir");
    require_pointer(output_dir, "output_dir");
    require_pointer(opts, "options");
    SegmentationConfig cfg;
    cfg.expected_cell_diameter = opts->diameter;
    cfg.source_cell_diameter = opts->source_cell_diameter;
    cfg.clahe_tile = opts->clahe_tile;
    cfg.clahe_clip_limit = opts->clip_limit;
    cfg.hough_min_radius = opts->min_radius;
    cfg.hough_max_radius = opts->max_radius;
    cfg.hough_min_center_distance = opts->min_center_distance;
    cfg.hough_accumulator_threshold = opts->accumulator_threshold;
    cfg.validate();

    const fs::path in(input_dir);
    if (!fs::is_directory(in)) throw NotFound("input directory not found: " + in.string());
    std::vector<fs::path> smears;
    for (const auto& entry : fs::directory_iterator(in))
      if (entry.is_regular_file() && is_image_file(entry.path())) smears.push_back(entry.path());
    std::sort(smears.begin(), smears.end());
    IMBACLASS_REQUIRE(!smears.empty(), "no PNG/PGM images in " + in.string());

    struct Output {
      std::string stem;
      std::vector<SegmentedCell> cells;
    };
    std::vector<Output> results;
    for (const fs::path& p : smears) results.push_back({p.stem().string(), segment_cells(read_image(p), cfg)});

    const fs::path out(output_dir);
    fs::create_directories(out);
    std::string csv = "smear,index,cx,cy,r,score\n";
    size_t total = 0;
    for (const Output& r : results)
      for (size_t k = 0; k < r.cells.size(); ++k) {
        write_image(r.cells[k].image, out / fmt::format("{}_cell{}.png", r.stem, k));
        const CircleDetection& d = r.cells[k].detection;
        csv += fmt::format("{},{},{:.3f},{:.3f},{:.3f},{:.4f}\n", r.stem, k, d.center_x, d.center_y,
                           d.radius, d.accumulator_score);
        ++total;
      }
    write_text(out / "detections.csv", csv);
    if (cells_out) *cells_out = total;
    log().info("segmented {} cells from {} images", total, smears.size());
  });
}

imbc_status imbc_run_plan_file(const char* plan_path, const char* out_dir, int jobs,
                               int override_seed, uint64_t seed) {
  return guarded([&] {
    require_pointer(plan_path, "plan_path");
    require_pointer(out_dir, "out_dir");
    IMBACLASS_REQUIRE(jobs >= 1, "jobs must be >= 1");
    ExperimentPlan plan = load_plan(plan_path);
    if (override_seed) plan.seed = seed;
    if (plan.dataset.directory && !fs::is_directory(*plan.dataset.directory))
      throw NotFound("dataset directory not found: " + plan.dataset.directory->string());
    const auto rows = run_experiment(plan, jobs);
    write_results(rows, plan, out_dir);
  });
}

imbc_status imbc_render_report(const char* results_path, char** markdown_out) {
  return guarded([&] {
    require_pointer(results_path, "results_path");
    require_pointer(markdown_out, "markdown_out");
    fs::path p(results_path);
    if (fs::is_directory(p)) p /= "results.csv";
    std::ifstream in(p, std::ios::binary);
    if (!in) throw NotFound("results file not found: " + p.string());
    std::stringstream text;
    text << in.rdbuf();
    const auto records = parse_results_csv(text.str());
    const std::string md = render_report(records);
    char* buf = new char[md.size() + 1];
    std::memcpy(buf, md.c_str(), md.size() + 1);
    *markdown_out = buf;
  });
}

}  // extern "C"
