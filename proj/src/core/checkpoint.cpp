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

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "imbaclass/error.hpp"
#include "imbaclass/json_io.hpp"
#include "imbaclass/nn.hpp"

namespace imbaclass {

namespace {

constexpr std::array<char, 4> kMagic{'I', 'M', 'B', 'C'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put_le(std::ostream& out, T v) {
  std::array<char, sizeof(T)> b;
  for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b.data(), b.size());
}

template <class T>
T get_le(std::istream& in, const std::string& path) {
  std::array<unsigned char, sizeof(T)> b;
  if (!in.read(reinterpret_cast<char*>(b.data()), b.size()))
    throw IoError(path + ": truncated checkpoint");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const NetworkSpec& spec,
                     const ParameterSet<float>& params) {
  const Network<float> net(spec);
  IMBACLASS_REQUIRE(params.values.size() == net.parameter_count(),
                    "parameter set does not match the network spec");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const std::string spec_json = to_json(spec).dump();
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(spec_json.size()));
  out.write(spec_json.data(), static_cast<std::streamsize>(spec_json.size()));
  put_le<std::uint64_t>(out, params.values.size());
  for (float v : params.values) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  if (!out) throw IoError("failed writing " + path.string());
}

std::pair<NetworkSpec, ParameterSet<float>> load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw NotFound("file not found: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string name = path.string();
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic)
    throw IoError(name + ": not a checkpoint file");
  const auto version = get_le<std::uint32_t>(in, name);
  if (version != kVersion) throw IoError(name + ": unsupported checkpoint version " + std::to_string(version));
  const auto len = get_le<std::uint32_t>(in, name);
  std::string spec_json(len, '\0');
  if (!in.read(spec_json.data(), len)) throw IoError(name + ": truncated checkpoint");
  NetworkSpec spec;
  try {
    spec = network_spec_from_json(nlohmann::json::parse(spec_json));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(name + ": corrupt network spec: " + e.what());
  }
  const Network<float> net(spec);
  const auto count = get_le<std::uint64_t>(in, name);
  if (count != net.parameter_count()) throw IoError(name + ": parameter count does not match spec");
  ParameterSet<float> params;
  params.layout = net.layout();
  params.values.resize(count);
  for (float& v : params.values) v = std::bit_cast<float>(get_le<std::uint32_t>(in, name));
  return {std::move(spec), std::move(params)};
}

}  // namespace imbaclass
