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

#ifndef IMBACLASS_SAMPLING_HPP_
#define IMBACLASS_SAMPLING_HPP_

#include <cstdint>

#include "imbaclass/dataset.hpp"
#include "imbaclass/image.hpp"
#include "imbaclass/rng.hpp"

namespace imbaclass {

struct AugmentationConfig {
  // Rotation angle is drawn uniformly from [-rotation_degrees, +rotation_degrees].
  double rotation_degrees = 15.0;
  bool horizontal_flip = true;
  bool vertical_flip = true;
  std::uint64_t seed = 0;

  void validate() const;
};

// One concrete augmentation: optional flips, then a rotation.
struct AugmentationDraw {
  double degrees = 0.0;
  bool flip_horizontal = false;
  bool flip_vertical = false;
};

Image flip_horizontal(const Image& img);
Image flip_vertical(const Image& img);

// Rotation about the image center (positive angles turn counter-clockwise as
// displayed) with bilinear sampling; positions outside the source footprint
// are filled with 0.
Image rotate(const Image& img, double degrees);

AugmentationDraw draw_augmentation(const AugmentationConfig& aug, Rng& rng);
Image apply_augmentation(const Image& img, const AugmentationDraw& draw);

// draw_augmentation followed by apply_augmentation. Square images only.
Image augment_image(const Image& img, const AugmentationConfig& aug, Rng& rng);

// Randomly drops samples of every class down to the smallest class count.
// Retained samples keep their relative order.
LabeledDataset undersample(const LabeledDataset& data, std::uint64_t seed);

// Keeps every original and appends augmented copies to each class until it
// reaches the largest class count. The k-th added sample (k counts from 0
// across all classes, in class order) uses Rng(derive_seed(aug.seed,
// "oversample", k)): first a uniform source index among the class originals,
// then draw_augmentation.
LabeledDataset oversample(const LabeledDataset& data, const AugmentationConfig& aug);

}  // namespace imbaclass

#endif  // IMBACLASS_SAMPLING_HPP_
