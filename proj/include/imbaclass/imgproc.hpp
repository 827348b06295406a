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

#ifndef IMBACLASS_IMGPROC_HPP_
#define IMBACLASS_IMGPROC_HPP_

#include <vector>

#include "imbaclass/image.hpp"

namespace imbaclass {

enum class Interpolation { kBilinear, kBicubic };

struct CircleDetection {
  double center_x = 0.0;
  double center_y = 0.0;
  double radius = 0.0;
  // Edge votes supporting the circle, normalized by its circumference: 1.0
  // means every pixel of the perimeter voted once.
  double accumulator_score = 0.0;
};

struct SegmentationConfig {
  // Side of every emitted cell crop.
  int expected_cell_diameter = 224;
  // Typical cell diameter in the raw smear. The smear is upscaled by
  // expected_cell_diameter / source_cell_diameter; 0 disables upscaling.
  double source_cell_diameter = 0.0;
  Interpolation interpolation = Interpolation::kBicubic;

  int clahe_tile = 8;
  double clahe_clip_limit = 2.0;

  // Radii and distances are in pixels of the image handed to hough_circles
  // (the upscaled smear inside segment_cells).
  double hough_min_radius = 80.0;
  double hough_max_radius = 128.0;
  double hough_min_center_distance = 160.0;
  double hough_accumulator_threshold = 0.35;
  // Minimum Sobel gradient magnitude (unit intensity per pixel) for a pixel
  // to vote.
  double hough_edge_threshold = 0.02;

  void validate() const;
};

// Resamples by `ratio` (>= 1) to round(w*ratio) x round(h*ratio). Sample
// positions are corner-aligned, so the four corner pixels are preserved and
// ratio 1 is the identity.
Image upscale(const Image& img, double ratio,
              Interpolation interp = Interpolation::kBicubic);

// Luminance conversion (BT.601 weights) followed by a min/max stretch to the
// full range. Constant images are returned as a single channel, unstretched.
Image normalize_grayscale(const Image& img);

// Contrast-limited adaptive histogram equalization over `tile`-pixel square
// tiles (edge tiles truncated), 256 bins, clip level clip_limit * area / 256,
// excess redistributed uniformly, tile mappings blended bilinearly.
Image adaptive_hist_eq(const Image& img, int tile, double clip_limit);

// Gradient-direction Hough voting over (cx, cy, r). Results are sorted by
// score, separated by at least min_center_distance, and above threshold.
std::vector<CircleDetection> hough_circles(const Image& img, const SegmentationConfig& cfg);

// Square crop of side 2*round(r) around the detection, clamped to the image
// and zero-padded (centered) to diameter x diameter. Detections wider than
// the target are cropped to exactly diameter x diameter.
Image crop_and_pad(const Image& img, const CircleDetection& det, int diameter);

struct SegmentedCell {
  Image image;
  // In raw smear coordinates (before upscaling).
  CircleDetection detection;
};

// Upscale -> grayscale normalization -> CLAHE -> Hough -> crop/pad. Crops are
// cut from the upscaled smear (original channels) in detection order.
std::vector<SegmentedCell> segment_cells(const Image& smear, const SegmentationConfig& cfg);

}  // namespace imbaclass

#endif  // IMBACLASS_IMGPROC_HPP_
