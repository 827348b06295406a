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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include "imbaclass/error.hpp"
#include "imbaclass/image.hpp"
#include "imbaclass/imgproc.hpp"
#include "imbaclass/rng.hpp"
#include "imbaclass/synthgen.hpp"

namespace imbaclass {
namespace {

namespace fs = std::filesystem;

struct Circle {
  double x, y, r;
};

// Bright disks on a dark field, 4x4 supersampled.
Image draw_disks(int w, int h, const std::vector<Circle>& circles) {
  Image img(w, h, 1, 0.1f);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double cover = 0.0;
      for (int sy = 0; sy < 4; ++sy)
        for (int sx = 0; sx < 4; ++sx) {
          const double px = x + (sx + 0.5) / 4.0 - 0.5, py = y + (sy + 0.5) / 4.0 - 0.5;
          for (const Circle& c : circles)
            if (std::hypot(px - c.x, py - c.y) <= c.r) {
              cover += 1.0 / 16.0;
              break;
            }
        }
      img.at(x, y) = static_cast<float>(0.1 + 0.7 * cover);
    }
  return img;
}

bool matches(const CircleDetection& d, const Circle& c) {
  return std::hypot(d.center_x - c.x, d.center_y - c.y) <= 2.0 && std::abs(d.radius - c.r) / c.r <= 0.10;
}

SegmentationConfig small_cells() {
  SegmentationConfig cfg;
  cfg.hough_min_radius = 10;
  cfg.hough_max_radius = 30;
  cfg.hough_min_center_distance = 20;
  return cfg;
}

TEST(Upscale, IdentityAndConstants) {
  Rng rng(1);
  Image img(10, 10, 1);
  for (float& v : img.pixels()) v = static_cast<float>(rng.uniform());
  EXPECT_EQ(upscale(img, 1.0), img);
  const Image flat(7, 5, 3, 128.0f / 255.0f);
  for (double ratio : {1.5, 2.0, 3.7})
    for (auto interp : {Interpolation::kBilinear, Interpolation::kBicubic}) {
      const Image up = upscale(flat, ratio, interp);
      EXPECT_EQ(up.width(), static_cast<int>(std::lround(7 * ratio)));
      EXPECT_EQ(up.height(), static_cast<int>(std::lround(5 * ratio)));
      for (float v : up.pixels()) EXPECT_NEAR(v, 128.0f / 255.0f, 1e-6f);
    }
}

TEST(Upscale, CheckerboardKeepsCorners) {
  const std::vector<std::uint8_t> px{0, 255, 255, 0};
  const Image board = Image::from_u8(2, 2, 1, px);
  const Image up = upscale(board, 2.0, Interpolation::kBicubic);
  ASSERT_EQ(up.width(), 4);
  EXPECT_EQ(up.at(0, 0), 0.0f);
  EXPECT_EQ(up.at(3, 0), 1.0f);
  EXPECT_EQ(up.at(0, 3), 1.0f);
  EXPECT_EQ(up.at(3, 3), 0.0f);
  for (float v : up.pixels()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(Upscale, RejectsShrinking) {
  EXPECT_THROW(upscale(Image(4, 4, 1), 0.5), InvalidArgument);
  EXPECT_THROW(upscale(Image(4, 4, 1), std::nan("")), InvalidArgument);
}

TEST(Grayscale, StretchLuminanceAndIdempotence) {
  const Image flat(3, 3, 3, 100.0f / 255.0f);
  const Image g = normalize_grayscale(flat);
  EXPECT_EQ(g.channels(), 1);
  for (float v : g.pixels()) EXPECT_NEAR(v, 100.0f / 255.0f, 1e-6f);

  Image ramp(2, 1, 1);
  ramp.at(0, 0) = 50.0f / 255.0f;
  ramp.at(1, 0) = 150.0f / 255.0f;
  const Image s = normalize_grayscale(ramp);
  EXPECT_EQ(s.at(0, 0), 0.0f);
  EXPECT_EQ(s.at(1, 0), 1.0f);

  Image rgb(3, 1, 3, 0.0f);
  rgb.at(0, 0, 0) = 1.0f;  // red
  rgb.at(1, 0, 1) = 1.0f;  // green
  rgb.at(2, 0, 2) = 0.5f;
  const Image l = normalize_grayscale(rgb);
  EXPECT_GT(l.at(1, 0), l.at(0, 0));
  EXPECT_EQ(normalize_grayscale(l), l);
}

TEST(Clahe, ConstantStaysConstantAndBoundsHold) {
  const Image flat(32, 32, 1, 0.4f);
  const Image out = adaptive_hist_eq(flat, 8, 2.0);
  for (float v : out.pixels()) EXPECT_EQ(v, out.pixels()[0]);

  Rng rng(2);
  Image noisy(37, 29, 1);
  for (float& v : noisy.pixels()) v = static_cast<float>(rng.uniform());
  const Image eq = adaptive_hist_eq(noisy, 8, 2.0);
  EXPECT_EQ(eq.width(), 37);
  EXPECT_EQ(eq.height(), 29);
  for (float v : eq.pixels()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  EXPECT_THROW(adaptive_hist_eq(Image(8, 8, 3), 8, 2.0), InvalidArgument);
  EXPECT_THROW(adaptive_hist_eq(flat, 8, 0.0), InvalidArgument);
}

TEST(Clahe, UniformTileHistogramIsNearlyUnchanged) {
  // Every 16x16 tile holds each of the 256 levels exactly once.
  Image img(64, 64, 1);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) img.at(x, y) = static_cast<float>(((y % 16) * 16 + x % 16) / 255.0);
  const Image out = adaptive_hist_eq(img, 16, 2.0);
  for (std::size_t i = 0; i < img.size(); ++i)
    EXPECT_LE(std::abs(quantize(out.pixels()[i]) - quantize(img.pixels()[i])), 1) << i;
}

TEST(Clahe, RaisesContrastAcrossAnEdge) {
  const Image disk = draw_disks(64, 64, {{32, 32, 14}});
  Image soft = disk;
  for (float& v : soft.pixels()) v = 0.4f + 0.2f * v;
  const Image eq = adaptive_hist_eq(soft, 16, 2.0);
  auto contrast = [](const Image& img, int x0, int y0) {
    float lo = 1.0f, hi = 0.0f;
    for (int y = y0; y < y0 + 16; ++y)
      for (int x = x0; x < x0 + 16; ++x) {
        lo = std::min(lo, img.at(x, y));
        hi = std::max(hi, img.at(x, y));
      }
    return hi - lo;
  };
  EXPECT_GE(contrast(eq, 16, 16), contrast(soft, 16, 16));
}

TEST(Hough, BlankImageHasNoCircles) {
  EXPECT_TRUE(hough_circles(Image(64, 64, 1, 0.3f), small_cells()).empty());
  auto bad = small_cells();
  bad.hough_max_radius = bad.hough_min_radius;
  EXPECT_THROW(hough_circles(Image(8, 8, 1), bad), InvalidArgument);
}

TEST(Hough, FindsOneDrawnCircle) {
  const Circle c{50, 50, 20};
  const auto d = hough_circles(draw_disks(100, 100, {c}), small_cells());
  ASSERT_EQ(d.size(), 1u);
  EXPECT_TRUE(matches(d[0], c));
}

TEST(Hough, FindsThreeSeparatedCircles) {
  const std::vector<Circle> truth{{30, 30, 15}, {90, 40, 20}, {55, 95, 18}};
  const auto d = hough_circles(draw_disks(130, 130, truth), small_cells());
  ASSERT_EQ(d.size(), 3u);
  for (const Circle& c : truth)
    EXPECT_TRUE(std::any_of(d.begin(), d.end(), [&](const auto& x) { return matches(x, c); }));
  for (std::size_t i = 1; i < d.size(); ++i) EXPECT_GE(d[i - 1].accumulator_score, d[i].accumulator_score);
}

TEST(Hough, RandomizedCountsAreRecovered) {
  const auto cfg = small_cells();
  Rng rng(77);
  for (int trial = 0; trial < 12; ++trial) {
    const int k = static_cast<int>(rng.below(9));
    std::vector<Circle> truth;
    int attempts = 0;
    while (static_cast<int>(truth.size()) < k && attempts++ < 5000) {
      const Circle c{rng.uniform(20, 180), rng.uniform(20, 180), rng.uniform(11, 18)};
      if (std::all_of(truth.begin(), truth.end(), [&](const Circle& o) {
            return std::hypot(o.x - c.x, o.y - c.y) > o.r + c.r + 6;
          }))
        truth.push_back(c);
    }
    const auto d = hough_circles(draw_disks(200, 200, truth), cfg);
    ASSERT_EQ(d.size(), truth.size()) << "trial " << trial;
    for (const Circle& c : truth)
      EXPECT_TRUE(std::any_of(d.begin(), d.end(), [&](const auto& x) { return matches(x, c); }));
    for (std::size_t i = 0; i < d.size(); ++i)
      for (std::size_t j = i + 1; j < d.size(); ++j)
        EXPECT_GE(std::hypot(d[i].center_x - d[j].center_x, d[i].center_y - d[j].center_y),
                  cfg.hough_min_center_distance);
  }
}

TEST(CropAndPad, ExactFitAndZeroBorder) {
  Image src(300, 300, 3, 0.5f);
  const Image exact = crop_and_pad(src, {150, 150, 112, 1.0}, 224);
  ASSERT_EQ(exact.width(), 224);
  for (float v : exact.pixels()) EXPECT_EQ(v, 0.5f);

  const Image padded = crop_and_pad(src, {150, 150, 100, 1.0}, 224);
  ASSERT_EQ(padded.width(), 224);
  ASSERT_EQ(padded.height(), 224);
  for (int y = 0; y < 224; ++y)
    for (int x = 0; x < 224; ++x) {
      const bool border = x < 12 || y < 12 || x >= 212 || y >= 212;
      for (int c = 0; c < 3; ++c) EXPECT_EQ(padded.at(x, y, c), border ? 0.0f : 0.5f);
    }
}

TEST(CropAndPad, InteriorEqualsSourceAndEdgesClamp) {
  Image src(60, 60, 1);
  for (int y = 0; y < 60; ++y)
    for (int x = 0; x < 60; ++x) src.at(x, y) = static_cast<float>((x + 60 * y) % 251) / 251.0f;
  const Image crop = crop_and_pad(src, {30, 30, 10, 1.0}, 32);
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 20; ++x) EXPECT_EQ(crop.at(6 + x, 6 + y), src.at(20 + x, 20 + y));
  const Image edge = crop_and_pad(src, {2, 2, 10, 1.0}, 32);
  EXPECT_EQ(edge.width(), 32);
  EXPECT_EQ(edge.at(6, 6), 0.0f);  // outside the source: zero
  EXPECT_EQ(edge.at(6 + 8, 6 + 8), src.at(0, 0));
}

TEST(Segment, UpscalesDetectsAndCrops) {
  const Smear smear = generate_smear(4, 120, 5);
  SegmentationConfig cfg;
  cfg.expected_cell_diameter = 96;
  cfg.source_cell_diameter = 42;
  cfg.hough_min_radius = 36;
  cfg.hough_max_radius = 58;
  cfg.hough_min_center_distance = 60;
  const auto cells = segment_cells(smear.image, cfg);
  ASSERT_EQ(cells.size(), 4u);
  for (const auto& cell : cells) {
    EXPECT_EQ(cell.image.width(), 96);
    EXPECT_EQ(cell.image.height(), 96);
    EXPECT_EQ(cell.image.channels(), 3);
  }
  for (const auto& t : smear.truth)
    EXPECT_TRUE(std::any_of(cells.begin(), cells.end(), [&](const SegmentedCell& c) {
      return matches(c.detection, {t.center_x, t.center_y, t.radius});
    }));
  EXPECT_TRUE(segment_cells(Image(50, 50, 3, 0.9f), cfg).empty());
}

TEST(Segment, RejectsInvalidConfig) {
  SegmentationConfig cfg;
  cfg.expected_cell_diameter = 0;
  EXPECT_THROW(segment_cells(Image(10, 10, 1), cfg), InvalidArgument);
  cfg = SegmentationConfig{};
  cfg.hough_min_radius = 130;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
}

TEST(Smear, CapacityErrorReportsFeasibleCount) {
  try {
    generate_smear(40, 100, 1);
    FAIL() << "expected CapacityError";
  } catch (const CapacityError& e) {
    EXPECT_GT(e.max_feasible(), 0);
    EXPECT_LT(e.max_feasible(), 40);
  }
}

TEST(ImageIo, PngAndPgmRoundTrip) {
  const fs::path dir = fs::temp_directory_path() / "imbaclass_io_test";
  fs::create_directories(dir);
  Rng rng(4);
  std::vector<std::uint8_t> gray(12 * 7), rgb(5 * 4 * 3);
  for (auto& v : gray) v = static_cast<std::uint8_t>(rng.below(256));
  for (auto& v : rgb) v = static_cast<std::uint8_t>(rng.below(256));
  const Image g = Image::from_u8(12, 7, 1, gray), c = Image::from_u8(5, 4, 3, rgb);
  write_image(g, dir / "g.png");
  write_image(g, dir / "g.pgm");
  write_image(c, dir / "c.png");
  EXPECT_EQ(read_image(dir / "g.png").to_u8(), gray);
  EXPECT_EQ(read_image(dir / "g.pgm").to_u8(), gray);
  EXPECT_EQ(read_image(dir / "c.png").to_u8(), rgb);
  EXPECT_THROW(read_image(dir / "missing.png"), NotFound);
  EXPECT_THROW(write_image(c, dir / "c.pgm"), InvalidArgument);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace imbaclass
