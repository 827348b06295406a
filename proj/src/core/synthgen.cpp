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

#include "imbaclass/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "imbaclass/error.hpp"
#include "imbaclass/rng.hpp"

namespace imbaclass {

namespace {

struct Range {
  double lo;
  double hi;
  double draw(Rng& rng) const { return rng.uniform(lo, hi); }
};

// Geometry shared by every class, relative to the image side.
constexpr Range kCellRadius{0.34, 0.42};
constexpr Range kBodyLevel{0.60, 0.85};
constexpr Range kPaleLevel{0.12, 0.24};
constexpr double kFieldLevel = 0.04;

// Class-specific parameters; radial positions are fractions of the cell
// radius. The ranges make each class carry one signature no other class can
// produce:
//   target     - centre >= 0.51 and a dark annulus (<= 0.24) at 0.32..0.60
//   hypochromic- everything inside 0.74 is dark (<= 0.24)
//   normal     - every point inside the rim stays >= 0.45
constexpr Range kTargetDisk{0.20, 0.32};
constexpr Range kTargetRimInner{0.60, 0.70};
constexpr Range kTargetDiskGain{0.85, 1.00};
constexpr Range kHypoRimInner{0.74, 0.86};
constexpr Range kNormalDipDepth{0.10, 0.25};
constexpr Range kNormalDipRadius{0.30, 0.50};

struct CellProfile {
  int cls = 0;
  double radius = 0.0;
  double body = 0.0;
  double pale = 0.0;
  double a = 0.0;  // target: disk radius;   hypo: rim inner;   normal: dip depth
  double b = 0.0;  // target: rim inner;     normal: dip radius
  double c = 0.0;  // target: disk level

  // Intensity at normalized radial position rho (inside the cell).
  double inside(double rho) const {
    switch (cls) {
      case kTargetCell:
        if (rho <= a) return c;
        if (rho < b) return pale;
        return body;
      case kHypochromic:
        return rho < a ? pale : body;
      default: {
        if (rho >= b) return body;
        const double dip = 0.5 * (1.0 + std::cos(std::numbers::pi * rho / b));
        return body * (1.0 - a * dip);
      }
    }
  }
};

CellProfile draw_profile(int cls, int size, Rng& rng) {
  CellProfile p;
  p.cls = cls;
  p.radius = kCellRadius.draw(rng) * size;
  p.body = kBodyLevel.draw(rng);
  p.pale = kPaleLevel.draw(rng);
  switch (cls) {
    case kTargetCell:
      p.a = kTargetDisk.draw(rng);
      p.b = kTargetRimInner.draw(rng);
      p.c = p.body * kTargetDiskGain.draw(rng);
      break;
    case kHypochromic:
      p.a = kHypoRimInner.draw(rng);
      break;
    default:
      p.a = kNormalDipDepth.draw(rng);
      p.b = kNormalDipRadius.draw(rng);
      break;
  }
  return p;
}

// 3x3 supersampled radial rendering; `sample(d)` maps distance from the
// centre to intensity.
template <class F>
double supersample(double px, double py, double cx, double cy, F&& sample) {
  double acc = 0.0;
  for (int sy = 0; sy < 3; ++sy)
    for (int sx = 0; sx < 3; ++sx) {
      const double x = px + (sx - 1) / 3.0 - cx;
      const double y = py + (sy - 1) / 3.0 - cy;
      acc += sample(std::sqrt(x * x + y * y));
    }
  return acc / 9.0;
}

}  // namespace

void SynthConfig::validate() const {
  IMBACLASS_REQUIRE(image_size >= 4, "synthetic image_size must be >= 4");
  IMBACLASS_REQUIRE(!class_counts.empty(), "class_counts must not be empty");
  IMBACLASS_REQUIRE(static_cast<int>(class_counts.size()) <= kNumCellClasses,
                    "synthetic generator supports at most 3 classes");
  IMBACLASS_REQUIRE(std::all_of(class_counts.begin(), class_counts.end(),
                                [](std::int64_t c) { return c >= 0; }),
                    "class counts must be >= 0");
  IMBACLASS_REQUIRE(std::any_of(class_counts.begin(), class_counts.end(),
                                [](std::int64_t c) { return c > 0; }),
                    "at least one class count must be > 0");
  IMBACLASS_REQUIRE(std::isfinite(noise_std) && noise_std >= 0.0, "noise_std must be >= 0");
}

Image generate_cell(int class_id, int size, std::uint64_t seed, double noise_std) {
  IMBACLASS_REQUIRE(class_id >= 0 && class_id < kNumCellClasses,
                    "unknown cell class id " + std::to_string(class_id));
  IMBACLASS_REQUIRE(size >= 4, "cell image size must be >= 4");
  IMBACLASS_REQUIRE(noise_std >= 0.0, "noise_std must be >= 0");
  Rng rng(seed);
  const CellProfile p = draw_profile(class_id, size, rng);
  const double c = (size - 1) / 2.0;
  Image img(size, size, 1);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double v = supersample(x, y, c, c, [&](double d) {
        return d <= p.radius ? p.inside(d / p.radius) : kFieldLevel;
      });
      if (noise_std > 0.0) v += rng.normal() * noise_std / 255.0;
      img.at(x, y) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  return img;
}

LabeledDataset generate_dataset(const SynthConfig& cfg) {
  cfg.validate();
  LabeledDataset data;
  data.num_classes = static_cast<int>(cfg.class_counts.size());
  std::int64_t index = 0;
  for (int cls = 0; cls < data.num_classes; ++cls)
    for (std::int64_t k = 0; k < cfg.class_counts[static_cast<std::size_t>(cls)]; ++k, ++index) {
      const auto s = derive_seed(cfg.seed, "cell", static_cast<std::uint64_t>(index));
      data.samples.push_back({generate_cell(cls, cfg.image_size, s, cfg.noise_std), cls, 0, 0});
    }
  Rng shuffler(derive_seed(cfg.seed, "shuffle"));
  shuffler.shuffle(data.samples);
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    data.samples[i].id = static_cast<std::int64_t>(i);
    data.samples[i].source_id = static_cast<std::int64_t>(i);
  }
  return data;
}

Smear generate_smear(int n_cells, int size, std::uint64_t seed, const SmearOptions& opts) {
  IMBACLASS_REQUIRE(n_cells >= 0, "n_cells must be >= 0");
  IMBACLASS_REQUIRE(size >= 8, "smear size must be >= 8");
  IMBACLASS_REQUIRE(opts.min_radius > 0.0 && opts.min_radius <= opts.max_radius,
                    "invalid smear radius range");
  Rng rng(seed);

  const double margin = 2.0;
  std::vector<CircleDetection> best;
  std::vector<CircleDetection> placed;
  bool ok = n_cells == 0;
  for (int restart = 0; restart < 20 && !ok; ++restart) {
    placed.clear();
    int attempts = 0;
    while (static_cast<int>(placed.size()) < n_cells && attempts < opts.max_attempts) {
      ++attempts;
      const double r = rng.uniform(opts.min_radius, opts.max_radius);
      const double lo = r + margin;
      const double hi = size - 1 - r - margin;
      if (hi <= lo) continue;
      const double cx = rng.uniform(lo, hi);
      const double cy = rng.uniform(lo, hi);
      const bool clash = std::any_of(placed.begin(), placed.end(), [&](const CircleDetection& o) {
        return std::hypot(o.center_x - cx, o.center_y - cy) <= o.radius + r + opts.gap;
      });
      if (!clash) placed.push_back({cx, cy, r, 1.0});
    }
    if (placed.size() > best.size()) best = placed;
    ok = static_cast<int>(placed.size()) == n_cells;
  }
  if (!ok) {
    throw CapacityError("cannot place " + std::to_string(n_cells) + " cells in a " +
                            std::to_string(size) + "px smear; max feasible n is about " +
                            std::to_string(best.size()),
                        static_cast<long>(best.size()));
  }

  // Pale pink plasma, darker red cells with a shallow central pallor.
  constexpr double kPlasma[3] = {0.93, 0.86, 0.88};
  constexpr double kCell[3] = {0.78, 0.40, 0.46};
  Smear smear{Image(size, size, 3), placed};
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      // Coverage-weighted blend of every cell touching this pixel.
      double cover = 0.0;
      double pallor = 0.0;
      for (const CircleDetection& c : placed) {
        if (std::abs(x - c.center_x) > c.radius + 1 || std::abs(y - c.center_y) > c.radius + 1)
          continue;
        cover += supersample(x, y, c.center_x, c.center_y,
                             [&](double d) { return d <= c.radius ? 1.0 : 0.0; });
        pallor += supersample(x, y, c.center_x, c.center_y, [&](double d) {
          const double rho = d / (0.45 * c.radius);
          return rho < 1.0 ? 0.35 * 0.5 * (1.0 + std::cos(std::numbers::pi * rho)) : 0.0;
        });
      }
      cover = std::min(cover, 1.0);
      for (int ch = 0; ch < 3; ++ch) {
        const double cell = kCell[ch] + pallor * (kPlasma[ch] - kCell[ch]);
        double v = kPlasma[ch] * (1.0 - cover) + cell * cover;
        if (opts.noise_std > 0.0) v += rng.normal() * opts.noise_std / 255.0;
        smear.image.at(x, y, ch) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  return smear;
}

}  // namespace imbaclass
