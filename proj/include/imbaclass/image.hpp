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

#ifndef IMBACLASS_IMAGE_HPP_
#define IMBACLASS_IMAGE_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace imbaclass {

// Interleaved 2-D pixel grid with 1 or 3 channels. Intensities are held as
// unit-interval floats; 8-bit quantization happens only in from_u8/to_u8 and
// the file readers/writers.
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, float fill = 0.0f);

  static Image from_u8(int width, int height, int channels,
                       std::span<const std::uint8_t> pixels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t size() const noexcept { return data_.size(); }

  float& at(int x, int y, int c = 0) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  float at(int x, int y, int c = 0) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  std::span<float> pixels() noexcept { return data_; }
  std::span<const float> pixels() const noexcept { return data_; }

  // Round-to-nearest 8-bit quantization, clamped to [0, 255].
  std::vector<std::uint8_t> to_u8() const;

  // Clamps every stored value into [0, 1].
  void clamp();

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

inline std::uint8_t quantize(float v) {
  const float s = v * 255.0f + 0.5f;
  if (!(s > 0.0f)) return 0;
  if (s >= 255.0f) return 255;
  return static_cast<std::uint8_t>(s);
}

// PNG (8/16-bit gray, gray+alpha, RGB, RGBA, palette) and binary/ASCII PGM.
// Alpha is dropped; 16-bit samples are reduced to 8 bits.
Image read_image(const std::filesystem::path& path);

// Format chosen by extension: ".pgm" writes binary PGM (grayscale only),
// anything else writes PNG.
void write_image(const Image& img, const std::filesystem::path& path);

}  // namespace imbaclass

#endif  // IMBACLASS_IMAGE_HPP_
