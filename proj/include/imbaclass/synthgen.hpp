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

#ifndef IMBACLASS_SYNTHGEN_HPP_
#define IMBACLASS_SYNTHGEN_HPP_

#include <cstdint>
#include <vector>

#include "imbaclass/dataset.hpp"
#include "imbaclass/image.hpp"
#include "imbaclass/imgproc.hpp"

namespace imbaclass {

// Class ids of the three synthetic morphologies.
enum CellClass : int {
  kTargetCell = 0,   // bright rim, dark annulus, bright central disk
  kHypochromic = 1,  // thin bright rim around a large dark center
  kNormalCell = 2,   // bright disk with a shallow central dip
};

inline constexpr int kNumCellClasses = 3;

struct SynthConfig {
  int image_size = 32;
  std::vector<std::int64_t> class_counts;
  // Per-pixel Gaussian noise, in 8-bit intensity units.
  double noise_std = 6.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Single square cell image. Cells are rendered as a brightness map on a
// near-black field so that zero-filled borders (padding, rotation) blend in.
Image generate_cell(int class_id, int size, std::uint64_t seed, double noise_std = 0.0);

// Exactly class_counts[c] images of class c, shuffled with cfg.seed. Image i
// (in class-major generation order) is seeded by derive_seed(seed, "cell", i).
LabeledDataset generate_dataset(const SynthConfig& cfg);

struct SmearOptions {
  double min_radius = 18.0;
  double max_radius = 24.0;
  // Minimum empty space between neighbouring cell boundaries.
  double gap = 4.0;
  double noise_std = 2.0;
  int max_attempts = 4000;
};

struct Smear {
  Image image;  // RGB
  std::vector<CircleDetection> truth;
};

// Composite RGB smear of n non-overlapping cells, all fully inside the frame.
// Throws CapacityError naming the largest count placed when n does not fit.
Smear generate_smear(int n_cells, int size, std::uint64_t seed, const SmearOptions& opts = {});

}  // namespace imbaclass

#endif  // IMBACLASS_SYNTHGEN_HPP_
