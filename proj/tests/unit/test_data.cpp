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
#include <fstream>
#include <set>
#include <vector>

#include "imbaclass/dataset.hpp"
#include "imbaclass/error.hpp"
#include "imbaclass/metrics.hpp"
#include "imbaclass/rng.hpp"
#include "imbaclass/sampling.hpp"
#include "imbaclass/synthgen.hpp"

namespace imbaclass {
namespace {

namespace fs = std::filesystem;

LabeledDataset synth(std::vector<std::int64_t> counts, std::uint64_t seed = 1, int size = 32) {
  SynthConfig cfg;
  cfg.image_size = size;
  cfg.class_counts = std::move(counts);
  cfg.seed = seed;
  return generate_dataset(cfg);
}

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / name) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

TEST(Synth, CountsShapeAndDeterminism) {
  const auto a = synth({10, 10, 80}, 1);
  EXPECT_EQ(a.size(), 100u);
  EXPECT_EQ(a.class_counts(), (std::vector<std::int64_t>{10, 10, 80}));
  for (const auto& s : a.samples) {
    EXPECT_EQ(s.image.width(), 32);
    EXPECT_EQ(s.image.channels(), 1);
    EXPECT_TRUE(s.is_original());
  }
  const auto b = synth({10, 10, 80}, 1);
  const auto c = synth({10, 10, 80}, 2);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.samples[i].image, b.samples[i].image);
  EXPECT_NE(a.samples[0].image, c.samples[0].image);
}

TEST(Synth, RejectsBadConfig) {
  EXPECT_THROW(synth({}), InvalidArgument);
  EXPECT_THROW(synth({1, -1}), InvalidArgument);
  EXPECT_THROW(synth({1, 1, 1, 1}), InvalidArgument);
  EXPECT_THROW(synth({0, 0}), InvalidArgument);
  EXPECT_THROW(synth({1}, 1, 2), InvalidArgument);
}

TEST(Synth, ClassesDifferInRadialProfile) {
  // Mean intensity near the center: target (bright disk) > normal (shallow
  // dip) > hypochromic (dark center).
  auto center_mean = [](int cls) {
    double sum = 0.0;
    for (int i = 0; i < 20; ++i) {
      const Image img = generate_cell(cls, 32, 100 + i);
      for (int y = 14; y < 18; ++y)
        for (int x = 14; x < 18; ++x) sum += img.at(x, y);
    }
    return sum / (20 * 16);
  };
  EXPECT_LT(center_mean(kHypochromic), 0.3);
  EXPECT_GT(center_mean(kTargetCell), 0.45);
  EXPECT_GT(center_mean(kNormalCell), 0.45);
}

TEST(Dataset, SaveLoadRoundTrip) {
  TempDir dir("imbaclass_ds_test");
  const auto data = synth({3, 4, 5}, 9);
  save_dataset(data, dir.path());
  EXPECT_TRUE(fs::exists(dir.path() / "manifest.csv"));
  std::ifstream manifest(dir.path() / "manifest.csv");
  std::string header, first;
  std::getline(manifest, header);
  std::getline(manifest, first);
  EXPECT_EQ(header, "path,label");
  const fs::path first_path = dir.path() / first.substr(0, first.find(','));
  EXPECT_TRUE(fs::exists(first_path));
  EXPECT_EQ(first_path.parent_path().filename().string(), first.substr(first.find(',') + 1));
  const auto back = load_dataset(dir.path());
  ASSERT_EQ(back.size(), data.size());
  EXPECT_EQ(back.class_counts(), data.class_counts());
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(back.samples[i].label, data.samples[i].label);
    EXPECT_EQ(back.samples[i].image.to_u8(), data.samples[i].image.to_u8());
  }
}

TEST(Dataset, LoadsClassDirectoriesWithoutManifest) {
  TempDir dir("imbaclass_ds_nomanifest");
  const auto data = synth({2, 3}, 4);
  save_dataset(data, dir.path());
  fs::remove(dir.path() / "manifest.csv");
  const auto back = load_dataset(dir.path());
  EXPECT_EQ(back.class_counts(), (std::vector<std::int64_t>{2, 3}));
  EXPECT_THROW(load_dataset(dir.path() / "nope"), NotFound);
}

TEST(Dataset, SubsetAndValidation) {
  auto data = synth({2, 2, 2});
  const std::vector<std::size_t> pick{5, 0};
  const auto sub = data.subset(pick);
  ASSERT_EQ(sub.size(), 2u);
  EXPECT_EQ(sub.samples[0].id, data.samples[5].id);
  data.samples[1].label = 7;
  EXPECT_THROW(data.validate(), InvalidArgument);
}

TEST(Augment, FlipsAreInvolutions) {
  const Image img = generate_cell(0, 32, 3, 20.0);
  EXPECT_EQ(flip_horizontal(flip_horizontal(img)), img);
  EXPECT_EQ(flip_vertical(flip_vertical(img)), img);
  EXPECT_EQ(flip_horizontal(img).at(0, 5), img.at(31, 5));
  EXPECT_EQ(flip_vertical(img).at(5, 0), img.at(5, 31));
}

TEST(Augment, RotationRoundTripWithinThreeLevels) {
  // Bilinear resampling loss shrinks with the pixel size of the features;
  // measured at the segmented-cell sizes.
  for (int size : {128, 224}) {
    for (int cls = 0; cls < kNumCellClasses; ++cls) {
      for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const Image img = generate_cell(cls, size, seed, 0.0);
        const Image back = rotate(rotate(img, 10.0), -10.0);
        double total = 0.0;
        for (std::size_t i = 0; i < img.size(); ++i)
          total += std::abs(quantize(back.pixels()[i]) - quantize(img.pixels()[i]));
        EXPECT_LT(total / static_cast<double>(img.size()), 3.0) << size << " " << cls << " " << seed;
      }
    }
  }
  const Image img = generate_cell(0, 32, 1, 6.0);
  EXPECT_EQ(rotate(img, 0.0), img);
}

TEST(Augment, QuarterTurnMovesPixelsExactly) {
  Image img(5, 5, 1, 0.0f);
  img.at(4, 2) = 1.0f;  // right of center
  const Image r = rotate(img, 90.0);
  // Counter-clockwise as displayed: right goes to top.
  EXPECT_NEAR(r.at(2, 0), 1.0f, 1e-5f);
  EXPECT_NEAR(r.at(4, 2), 0.0f, 1e-5f);
}

TEST(Augment, DrawsStayWithinConfig) {
  AugmentationConfig aug;
  aug.rotation_degrees = 10.0;
  aug.horizontal_flip = false;
  Rng rng(6);
  for (int i = 0; i < 200; ++i) {
    const auto d = draw_augmentation(aug, rng);
    EXPECT_LE(std::abs(d.degrees), 10.0);
    EXPECT_FALSE(d.flip_horizontal);
  }
  aug.rotation_degrees = 200.0;
  EXPECT_THROW(aug.validate(), InvalidArgument);
}

TEST(Resample, UndersampleEqualizesToMinimum) {
  const auto data = synth({12, 30, 50}, 3);
  const auto under = undersample(data, 7);
  EXPECT_EQ(under.class_counts(), (std::vector<std::int64_t>{12, 12, 12}));
  EXPECT_EQ(imbalance_ratio(under.class_counts()), 1.0);
  std::set<std::int64_t> ids;
  for (const auto& s : data.samples) ids.insert(s.id);
  for (std::size_t i = 0; i < under.size(); ++i) {
    EXPECT_TRUE(ids.count(under.samples[i].id));
    if (i > 0) EXPECT_LT(under.samples[i - 1].id, under.samples[i].id);
  }
  const auto again = undersample(data, 7);
  for (std::size_t i = 0; i < under.size(); ++i) EXPECT_EQ(again.samples[i].id, under.samples[i].id);
}

TEST(Resample, OversampleEqualizesToMaximum) {
  const auto data = synth({5, 9, 20}, 3);
  AugmentationConfig aug;
  aug.seed = 11;
  const auto over = oversample(data, aug);
  EXPECT_EQ(over.class_counts(), (std::vector<std::int64_t>{20, 20, 20}));
  std::set<std::int64_t> ids;
  std::size_t originals = 0;
  for (const auto& s : over.samples) {
    EXPECT_TRUE(ids.insert(s.id).second);
    if (s.is_original()) {
      ++originals;
    } else {
      EXPECT_GT(s.id, data.max_id());
      const auto src = std::find_if(data.samples.begin(), data.samples.end(),
                                    [&](const Sample& o) { return o.id == s.source_id; });
      ASSERT_NE(src, data.samples.end());
      EXPECT_EQ(src->label, s.label);
    }
  }
  EXPECT_EQ(originals, data.size());
  const auto again = oversample(data, aug);
  for (std::size_t i = 0; i < over.size(); ++i) EXPECT_EQ(again.samples[i].image, over.samples[i].image);
}

TEST(Resample, DegenerateAugmentationDuplicates) {
  const auto data = synth({2, 5}, 8);
  AugmentationConfig aug;
  aug.rotation_degrees = 0.0;
  aug.horizontal_flip = false;
  aug.vertical_flip = false;
  const auto over = oversample(data, aug);
  for (const auto& s : over.samples) {
    const auto src = std::find_if(data.samples.begin(), data.samples.end(),
                                  [&](const Sample& o) { return o.id == s.source_id; });
    ASSERT_NE(src, data.samples.end());
    EXPECT_EQ(src->image, s.image);
  }
}

TEST(Resample, BalancedInputIsUnchanged) {
  const auto data = synth({4, 4}, 2);
  EXPECT_EQ(undersample(data, 1).size(), 8u);
  EXPECT_EQ(oversample(data, {}).size(), 8u);
}

}  // namespace
}  // namespace imbaclass
