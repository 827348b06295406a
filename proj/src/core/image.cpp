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

#include "imbaclass/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "imbaclass/error.hpp"

namespace imbaclass {

Image::Image(int width, int height, int channels, float fill)
    : width_(width), height_(height), channels_(channels) {
  IMBACLASS_REQUIRE(width >= 1 && height >= 1, "image dimensions must be >= 1");
  IMBACLASS_REQUIRE(channels == 1 || channels == 3, "image channels must be 1 or 3");
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

Image Image::from_u8(int width, int height, int channels,
                     std::span<const std::uint8_t> pixels) {
  Image img(width, height, channels);
  IMBACLASS_REQUIRE(pixels.size() == img.size(), "pixel buffer size does not match dimensions");
  std::transform(pixels.begin(), pixels.end(), img.data_.begin(),
                 [](std::uint8_t v) { return static_cast<float>(v) / 255.0f; });
  return img;
}

std::vector<std::uint8_t> Image::to_u8() const {
  std::vector<std::uint8_t> out(data_.size());
  std::transform(data_.begin(), data_.end(), out.begin(), quantize);
  return out;
}

void Image::clamp() {
  for (float& v : data_) v = std::clamp(v, 0.0f, 1.0f);
}

namespace {

std::string lower_extension(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

// Skips whitespace and '#' comments in a PNM header.
int read_pnm_int(std::istream& in) {
  int c = in.peek();
  while (c != EOF && (std::isspace(c) || c == '#')) {
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else {
      in.get();
    }
    c = in.peek();
  }
  int value = -1;
  if (!(in >> value)) throw IoError("malformed PGM header");
  return value;
}

Image read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P5" && magic != "P2") throw IoError("not a PGM file: " + path.string());
  const int w = read_pnm_int(in);
  const int h = read_pnm_int(in);
  const int maxval = read_pnm_int(in);
  if (w < 1 || h < 1 || maxval < 1 || maxval > 65535)
    throw IoError("unsupported PGM header in " + path.string());
  std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h);
  auto scale = [maxval](int v) {
    return static_cast<std::uint8_t>(std::clamp((v * 255 + maxval / 2) / maxval, 0, 255));
  };
  if (magic == "P2") {
    for (auto& v : px) v = scale(read_pnm_int(in));
  } else {
    in.get();  // single whitespace after maxval
    if (maxval < 256) {
      in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
      if (maxval != 255)
        for (auto& v : px) v = scale(v);
    } else {
      std::vector<std::uint8_t> raw(px.size() * 2);
      in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
      for (std::size_t i = 0; i < px.size(); ++i) px[i] = scale(raw[2 * i] << 8 | raw[2 * i + 1]);
    }
    if (!in) throw IoError("truncated PGM data in " + path.string());
  }
  return Image::from_u8(w, h, 1, px);
}

void write_pgm(const Image& img, const std::filesystem::path& path) {
  if (img.channels() != 1) throw InvalidArgument("PGM output requires a single-channel image");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  const auto px = img.to_u8();
  out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Image read_png(const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.string().c_str()))
    throw IoError("cannot read PNG " + path.string() + ": " + png.message);
  const int channels = (png.format & PNG_FORMAT_FLAG_COLOR) ? 3 : 1;
  png.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buf.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw IoError("cannot decode PNG " + path.string() + ": " + msg);
  }
  return Image::from_u8(static_cast<int>(png.width), static_cast<int>(png.height), channels, buf);
}

void write_png(const Image& img, const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width());
  png.height = static_cast<png_uint_32>(img.height());
  png.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const auto px = img.to_u8();
  if (!png_image_write_to_file(&png, path.string().c_str(), 0, px.data(), 0, nullptr))
    throw IoError("cannot write PNG " + path.string() + ": " + png.message);
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw NotFound("no such image: " + path.string());
  const std::string ext = lower_extension(path);
  if (ext == ".pgm" || ext == ".pnm") return read_pgm(path);
  return read_png(path);
}

void write_image(const Image& img, const std::filesystem::path& path) {
  if (img.empty()) throw InvalidArgument("cannot write an empty image");
  if (lower_extension(path) == ".pgm") {
    write_pgm(img, path);
  } else {
    write_png(img, path);
  }
}

}  // namespace imbaclass
