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

#ifndef IMBACLASS_DATASET_HPP_
#define IMBACLASS_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "imbaclass/image.hpp"

namespace imbaclass {

struct Sample {
  Image image;
  int label = 0;
  // Unique within a dataset lineage. Augmented copies get fresh ids and keep
  // the id of the original they were derived from in source_id.
  std::int64_t id = 0;
  std::int64_t source_id = 0;

  bool is_original() const noexcept { return id == source_id; }
};

struct LabeledDataset {
  int num_classes = 0;
  std::vector<Sample> samples;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }

  std::vector<std::int64_t> class_counts() const;
  std::vector<std::size_t> indices_of_class(int label) const;
  LabeledDataset subset(std::span<const std::size_t> indices) const;
  std::int64_t max_id() const;

  // Throws InvalidArgument unless all images share one shape and labels lie
  // in [0, num_classes).
  void validate() const;
};

// Reads <dir>/manifest.csv (columns path,label; paths relative to dir) when
// present, otherwise every PNG/PGM under integer-named class subdirectories.
LabeledDataset load_dataset(const std::filesystem::path& dir);

// Writes <dir>/<label>/<index>.png for each sample plus manifest.csv.
void save_dataset(const LabeledDataset& data, const std::filesystem::path& dir);

}  // namespace imbaclass

#endif  // IMBACLASS_DATASET_HPP_
