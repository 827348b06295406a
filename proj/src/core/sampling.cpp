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

#include "imbaclass/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "imbaclass/error.hpp"

namespace imbaclass {

namespace {

void require_every_class(const LabeledDataset& data) {
  data.validate();
  IMBACLASS_REQUIRE(data.num_classes >= 1, "dataset has no classes");
  const auto counts = data.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c)
    IMBACLASS_REQUIRE(counts[c] > 0, "class " + std::to_string(c) + " has no samples");
}

}  // namespace

void AugmentationConfig::validate() const {
  IMBACLASS_REQUIRE(std::isfinite(rotation_degrees) && rotation_degrees >= 0.0 &&
                        rotation_degrees <= 180.0,
                    "rotation_degrees must lie in [0, 180]");
}

Image flip_horizontal(const Image& img) {
  Image out(img.width(), img.height(), img.channels());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) out.at(img.width() - 1 - x, y, c) = img.at(x, y, c);
  return out;
}

Image flip_vertical(const Image& img) {
  Image out(img.width(), img.height(), img.channels());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) out.at(x, img.height() - 1 - y, c) = img.at(x, y, c);
  return out;
}

Image rotate(const Image& img, double degrees) {
  IMBACLASS_REQUIRE(std::isfinite(degrees), "rotation angle must be finite");
  if (degrees == 0.0) return img;
  const double t = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(t), sn = std::sin(t);
  const double cx = (img.width() - 1) / 2.0, cy = (img.height() - 1) / 2.0;
  Image out(img.width(), img.height(), img.channels());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      // Inverse map: rotate the destination position back onto the source.
      const double dx = x - cx, dy = y - cy;
      const double sx = cx + cs * dx - sn * dy;
      const double sy = cy + sn * dx + cs * dy;
      const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0, fy = sy - y0;
      for (int c = 0; c < img.channels(); ++c) {
        auto tap = [&](int xx, int yy) -> double {
          if (xx < 0 || yy < 0 || xx >= img.width() || yy >= img.height()) return 0.0;
          return img.at(xx, yy, c);
        };
        const double v = (1 - fy) * ((1 - fx) * tap(x0, y0) + fx * tap(x0 + 1, y0)) +
                         fy * ((1 - fx) * tap(x0, y0 + 1) + fx * tap(x0 + 1, y0 + 1));
        out.at(x, y, c) = static_cast<float>(v);
      }
    }
  return out;
}

AugmentationDraw draw_augmentation(const AugmentationConfig& aug, Rng& rng) {
  AugmentationDraw d;
  d.degrees = rng.uniform(-aug.rotation_degrees, aug.rotation_degrees);
  d.flip_horizontal = aug.horizontal_flip && rng.coin();
  d.flip_vertical = aug.vertical_flip && rng.coin();
  return d;
}

Image apply_augmentation(const Image& img, const AugmentationDraw& draw) {
  IMBACLASS_REQUIRE(img.width() == img.height(), "augmentation needs a square image");
  Image out = img;
  if (draw.flip_horizontal) out = flip_horizontal(out);
  if (draw.flip_vertical) out = flip_vertical(out);
  return rotate(out, draw.degrees);
}

Image augment_image(const Image& img, const AugmentationConfig& aug, Rng& rng) {
  aug.validate();
  IMBACLASS_REQUIRE(img.width() == img.height(), "augmentation needs a square image");
  return apply_augmentation(img, draw_augmentation(aug, rng));
}

LabeledDataset undersample(const LabeledDataset& data, std::uint64_t seed) {
  require_every_class(data);
  const auto counts = data.class_counts();
  const std::int64_t target = *std::min_element(counts.begin(), counts.end());
  std::vector<std::size_t> keep;
  for (int c = 0; c < data.num_classes; ++c) {
    std::vector<std::size_t> idx = data.indices_of_class(c);
    Rng(derive_seed(seed, "undersample", static_cast<std::uint64_t>(c))).shuffle(idx);
    idx.resize(static_cast<std::size_t>(target));
    keep.insert(keep.end(), idx.begin(), idx.end());
  }
  std::sort(keep.begin(), keep.end());
  return data.subset(keep);
}

LabeledDataset oversample(const LabeledDataset& data, const AugmentationConfig& aug) {
  aug.validate();
  require_every_class(data);
  const auto counts = data.class_counts();
  const std::int64_t target = *std::max_element(counts.begin(), counts.end());
  LabeledDataset out = data;
  std::int64_t next_id = data.max_id() + 1;
  std::uint64_t k = 0;
  for (int c = 0; c < data.num_classes; ++c) {
    const std::vector<std::size_t> originals = data.indices_of_class(c);
    for (std::int64_t have = counts[static_cast<std::size_t>(c)]; have < target; ++have, ++k) {
      Rng rng(derive_seed(aug.seed, "oversample", k));
      const Sample& src = data.samples[originals[rng.below(originals.size())]];
      Sample s;
      s.image = augment_image(src.image, aug, rng);
      s.label = c;
      s.id = next_id++;
      s.source_id = src.source_id;
      out.samples.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace imbaclass
