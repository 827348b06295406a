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

#include "imbaclass/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>

#include "imbaclass/error.hpp"

namespace fs = std::filesystem;

namespace imbaclass {

std::vector<std::int64_t> LabeledDataset::class_counts() const {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (const Sample& s : samples) ++counts[static_cast<std::size_t>(s.label)];
  return counts;
}

std::vector<std::size_t> LabeledDataset::indices_of_class(int label) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i].label == label) idx.push_back(i);
  return idx;
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
  LabeledDataset out;
  out.num_classes = num_classes;
  out.samples.reserve(indices.size());
  for (std::size_t i : indices) out.samples.push_back(samples.at(i));
  return out;
}

std::int64_t LabeledDataset::max_id() const {
  std::int64_t m = -1;
  for (const Sample& s : samples) m = std::max(m, s.id);
  return m;
}

void LabeledDataset::validate() const {
  IMBACLASS_REQUIRE(num_classes >= 1, "dataset must declare at least one class");
  for (const Sample& s : samples) {
    IMBACLASS_REQUIRE(s.label >= 0 && s.label < num_classes, "sample label out of range");
    const Image& a = s.image;
    const Image& b = samples.front().image;
    IMBACLASS_REQUIRE(a.width() == b.width() && a.height() == b.height() &&
                          a.channels() == b.channels(),
                      "dataset images must share one shape");
  }
}

namespace {

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".pgm";
}

int parse_label(const std::string& text, const std::string& context) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (used != text.size() || v < 0) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument("bad class label '" + text + "' in " + context);
  }
}

}  // namespace

LabeledDataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw NotFound("no such dataset directory: " + dir.string());
  LabeledDataset data;
  std::vector<std::pair<fs::path, int>> entries;
  const fs::path manifest = dir / "manifest.csv";
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (header) {
        header = false;
        if (line.rfind("path", 0) == 0) continue;
      }
      const auto comma = line.rfind(',');
      if (comma == std::string::npos) throw IoError("malformed manifest row: " + line);
      entries.emplace_back(dir / line.substr(0, comma),
                           parse_label(line.substr(comma + 1), manifest.string()));
    }
  } else {
    std::vector<fs::path> class_dirs;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_directory()) class_dirs.push_back(e.path());
    std::sort(class_dirs.begin(), class_dirs.end());
    for (const fs::path& cd : class_dirs) {
      const int label = parse_label(cd.filename().string(), dir.string());
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(cd))
        if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (auto& f : files) entries.emplace_back(std::move(f), label);
    }
  }
  int max_label = -1;
  std::int64_t next_id = 0;
  for (auto& [path, label] : entries) {
    max_label = std::max(max_label, label);
    Sample s{read_image(path), label, next_id, next_id};
    ++next_id;
    data.samples.push_back(std::move(s));
  }
  data.num_classes = max_label + 1;
  if (data.empty()) throw InvalidArgument("dataset directory holds no images: " + dir.string());
  data.validate();
  return data;
}

void save_dataset(const LabeledDataset& data, const fs::path& dir) {
  fs::create_directories(dir);
  for (int c = 0; c < data.num_classes; ++c) fs::create_directories(dir / std::to_string(c));
  std::ostringstream manifest;
  manifest << "path,label\n";
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const Sample& s = data.samples[i];
    const std::string rel = std::to_string(s.label) + "/" + std::to_string(i) + ".png";
    write_image(s.image, dir / rel);
    manifest << rel << ',' << s.label << '\n';
  }
  std::ofstream out(dir / "manifest.csv");
  out << manifest.str();
  if (!out) throw IoError("cannot write manifest in " + dir.string());
}

}  // namespace imbaclass
