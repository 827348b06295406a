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

// imbaclass command-line front end; talks to the library only through the C
// interface.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "imbaclass/imbaclass.h"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

int fail(int code, std::string message) {
  for (char& c : message)
    if (c == '\n' || c == '\r') c = ' ';
  std::cerr << "error: " << message << "\n";
  return code;
}

int fail_status(imbc_status s) {
  const int code = (s == IMBC_INVALID_ARGUMENT || s == IMBC_NOT_FOUND || s == IMBC_CAPACITY)
                       ? kExitValidation
                       : kExitRuntime;
  return fail(code, imbc_last_error());
}

struct DatasetHandle {
  imbc_dataset* ptr = nullptr;
  ~DatasetHandle() { imbc_dataset_free(ptr); }
};

struct SynthArgs {
  std::string out;
  std::vector<std::int64_t> counts;
  int size = 32;
  double noise = 6.0;
  std::uint64_t seed = 0;
};

struct SegmentArgs {
  std::string input, output;
  imbc_segment_options opts{};
};

struct ResampleArgs {
  std::string mode, in, out;
  double rotation = 15.0;
  bool no_flip = false;
  std::uint64_t seed = 0;
};

struct RunArgs {
  std::string plan, out;
  int jobs = 1;
  std::optional<std::uint64_t> seed;
};

struct ReportArgs {
  std::string results, out;
  std::uint64_t seed = 0;
};

int run_synth(const SynthArgs& a) {
  DatasetHandle ds;
  if (auto s = imbc_synth_dataset(a.counts.data(), a.counts.size(), a.size, a.noise, a.seed, &ds.ptr))
    return fail_status(s);
  if (auto s = imbc_dataset_save(ds.ptr, a.out.c_str())) return fail_status(s);
  return 0;
}

int run_segment(const SegmentArgs& a) {
  size_t cells = 0;
  if (auto s = imbc_segment_directory(a.input.c_str(), a.output.c_str(), &a.opts, &cells))
    return fail_status(s);
  std::cout << cells << " cells written to " << a.output << "\n";
  return 0;
}

int run_resample(const ResampleArgs& a) {
  DatasetHandle in, out;
  if (auto s = imbc_dataset_load(a.in.c_str(), &in.ptr)) return fail_status(s);
  const auto s = a.mode == "under"
                     ? imbc_undersample(in.ptr, a.seed, &out.ptr)
                     : imbc_oversample(in.ptr, a.rotation, !a.no_flip, !a.no_flip, a.seed, &out.ptr);
  if (s) return fail_status(s);
  if (auto s2 = imbc_dataset_save(out.ptr, a.out.c_str())) return fail_status(s2);
  return 0;
}

int run_plan(const RunArgs& a) {
  if (auto s = imbc_run_plan_file(a.plan.c_str(), a.out.c_str(), a.jobs, a.seed.has_value(),
                                  a.seed.value_or(0)))
    return fail_status(s);
  return 0;
}

int run_report(const ReportArgs& a) {
  char* md = nullptr;
  if (auto s = imbc_render_report(a.results.c_str(), &md)) return fail_status(s);
  const std::string text(md);
  imbc_string_free(md);
  if (a.out.empty()) {
    std::cout << text;
    return 0;
  }
  std::ofstream f(a.out, std::ios::binary);
  if (!(f << text)) return fail(kExitRuntime, "cannot write " + a.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Class-imbalance experiments on blood-cell images"};
  app.require_subcommand(1);
  std::string log_level;
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off (overrides IMBACLASS_LOG)");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic labelled cell dataset");
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--counts", synth.counts, "Images per class, comma separated")
      ->required()
      ->delimiter(',');
  synth_cmd->add_option("--size", synth.size, "Image side in pixels")->capture_default_str();
  synth_cmd->add_option("--noise", synth.noise, "Gaussian noise sigma (8-bit units)")->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "Random seed")->capture_default_str();

  SegmentArgs seg;
  imbc_segment_options_default(&seg.opts);
  std::uint64_t segment_seed = 0;
  auto* seg_cmd = app.add_subcommand("segment", "Detect and crop cells from smear images");
  seg_cmd->add_option("--input", seg.input, "Directory of smear images")->required();
  seg_cmd->add_option("--output", seg.output, "Directory for crops and detections.csv")->required();
  seg_cmd->add_option("--diameter", seg.opts.diameter, "Side of every cell crop")->capture_default_str();
  seg_cmd->add_option("--source-diameter", seg.opts.source_cell_diameter,
                      "Typical cell diameter in the smear; 0 disables upscaling")
      ->capture_default_str();
  seg_cmd->add_option("--clahe-tile", seg.opts.clahe_tile, "CLAHE tile side")->capture_default_str();
  seg_cmd->add_option("--clip-limit", seg.opts.clip_limit, "CLAHE clip limit")->capture_default_str();
  seg_cmd->add_option("--min-radius", seg.opts.min_radius, "Smallest Hough radius")->capture_default_str();
  seg_cmd->add_option("--max-radius", seg.opts.max_radius, "Largest Hough radius")->capture_default_str();
  seg_cmd->add_option("--min-distance", seg.opts.min_center_distance, "Minimum center spacing")
      ->capture_default_str();
  seg_cmd->add_option("--threshold", seg.opts.accumulator_threshold, "Minimum accumulator score")
      ->capture_default_str();
  seg_cmd->add_option("--seed", segment_seed, "Accepted for uniformity; segmentation is deterministic");

  ResampleArgs res;
  auto* res_cmd = app.add_subcommand("resample", "Balance a dataset by under- or over-sampling");
  res_cmd->add_option("--mode", res.mode, "under or over")
      ->required()
      ->check(CLI::IsMember({"under", "over"}));
  res_cmd->add_option("--in", res.in, "Input dataset directory")->required();
  res_cmd->add_option("--out", res.out, "Output dataset directory")->required();
  res_cmd->add_option("--rotation", res.rotation, "Max rotation of augmented copies (degrees)")
      ->capture_default_str();
  res_cmd->add_flag("--no-flip", res.no_flip, "Disable random flips of augmented copies");
  res_cmd->add_option("--seed", res.seed, "Random seed")->capture_default_str();

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment plan");
  run_cmd->add_option("--plan", run.plan, "Plan JSON file")->required();
  run_cmd->add_option("--out", run.out, "Results directory")->required();
  run_cmd->add_option("--jobs", run.jobs, "Parallel training jobs")->capture_default_str();
  run_cmd->add_option("--seed", run.seed, "Override the plan's master seed");

  ReportArgs rep;
  auto* rep_cmd = app.add_subcommand("report", "Summarize a results.csv as markdown");
  rep_cmd->add_option("--results", rep.results, "results.csv or the directory holding it")->required();
  rep_cmd->add_option("--out", rep.out, "Write the markdown here instead of stdout");
  rep_cmd->add_option("--seed", rep.seed, "Accepted for uniformity; reports are deterministic");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kExitValidation, e.what());
  }

  if (!log_level.empty())
    if (auto s = imbc_set_log_level(log_level.c_str())) return fail_status(s);

  if (*synth_cmd) return run_synth(synth);
  if (*seg_cmd) return run_segment(seg);
  if (*res_cmd) return run_resample(res);
  if (*run_cmd) return run_plan(run);
  return run_report(rep);
}
