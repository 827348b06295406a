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

#include "imbaclass/json_io.hpp"

#include <fstream>
#include <initializer_list>
#include <string>

#include "imbaclass/error.hpp"

namespace imbaclass {

using nlohmann::json;

namespace {

void require_object(const json& j, const std::string& what,
                    std::initializer_list<const char*> allowed) {
  IMBACLASS_REQUIRE(j.is_object(), what + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    IMBACLASS_REQUIRE(known, what + ": unknown key '" + key + "'");
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& what) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw InvalidArgument(what + ": key '" + key + "' has the wrong type");
  }
}

const char* kind_id(LayerKind k) {
  switch (k) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kAffine: return "affine";
    case LayerKind::kMaxPool: return "max_pool";
    case LayerKind::kAvgPool: return "avg_pool";
    case LayerKind::kResidual: return "residual";
    case LayerKind::kDense: return "dense";
    case LayerKind::kTransition: return "transition";
    case LayerKind::kGlobalAvgPool: return "global_avg_pool";
    case LayerKind::kLinear: return "linear";
  }
  return "";
}

LayerKind kind_from_id(const std::string& s) {
  for (LayerKind k : {LayerKind::kConv, LayerKind::kRelu, LayerKind::kAffine, LayerKind::kMaxPool,
                      LayerKind::kAvgPool, LayerKind::kResidual, LayerKind::kDense,
                      LayerKind::kTransition, LayerKind::kGlobalAvgPool, LayerKind::kLinear})
    if (s == kind_id(k)) return k;
  throw InvalidArgument("unknown layer kind '" + s + "'");
}

}  // namespace

json to_json(const LossConfig& cfg) {
  if (cfg.family == LossFamily::kCrossEntropy)
    return {{"family", "cross_entropy"}, {"epsilon", cfg.epsilon}};
  return {{"family", "focal"}, {"alpha", cfg.alpha}, {"gamma", cfg.gamma}, {"epsilon", cfg.epsilon}};
}

LossConfig loss_config_from_json(const json& j) {
  const std::string what = "loss config";
  require_object(j, what, {"family", "alpha", "gamma", "epsilon"});
  LossConfig cfg;
  const auto family = get_or<std::string>(j, "family", "cross_entropy", what);
  if (family == "focal") {
    cfg.family = LossFamily::kFocal;
  } else if (family == "cross_entropy") {
    cfg.family = LossFamily::kCrossEntropy;
  } else {
    throw InvalidArgument(what + ": unknown family '" + family + "'");
  }
  cfg.alpha = get_or(j, "alpha", cfg.alpha, what);
  cfg.gamma = get_or(j, "gamma", cfg.gamma, what);
  cfg.epsilon = get_or(j, "epsilon", cfg.epsilon, what);
  cfg.validate();
  return cfg;
}

json to_json(const NetworkSpec& spec) {
  json layers = json::array();
  for (const LayerSpec& l : spec.layers) {
    json o{{"kind", kind_id(l.kind)}};
    switch (l.kind) {
      case LayerKind::kConv:
        o["out_channels"] = l.out_channels;
        o["kernel"] = l.kernel;
        o["stride"] = l.stride;
        break;
      case LayerKind::kMaxPool:
      case LayerKind::kAvgPool:
        o["window"] = l.window;
        break;
      case LayerKind::kResidual:
        o["out_channels"] = l.out_channels;
        o["repeat"] = l.repeat;
        break;
      case LayerKind::kDense:
        o["repeat"] = l.repeat;
        o["growth"] = l.growth;
        break;
      case LayerKind::kTransition:
        o["out_channels"] = l.out_channels;
        break;
      default:
        break;
    }
    layers.push_back(std::move(o));
  }
  return {{"name", spec.name},
          {"input", {spec.input.channels, spec.input.height, spec.input.width}},
          {"num_classes", spec.num_classes},
          {"layers", std::move(layers)}};
}

NetworkSpec network_spec_from_json(const json& j) {
  const std::string what = "network spec";
  require_object(j, what, {"name", "input", "num_classes", "layers"});
  NetworkSpec spec;
  spec.name = get_or<std::string>(j, "name", "", what);
  const auto in = get_or<std::vector<int>>(j, "input", {1, 32, 32}, what);
  IMBACLASS_REQUIRE(in.size() == 3, what + ": input must be [channels, height, width]");
  spec.input = {in[0], in[1], in[2]};
  spec.num_classes = get_or(j, "num_classes", 3, what);
  IMBACLASS_REQUIRE(j.contains("layers") && j.at("layers").is_array(),
                    what + ": layers must be an array");
  for (const json& o : j.at("layers")) {
    require_object(o, "layer", {"kind", "out_channels", "kernel", "stride", "window", "repeat", "growth"});
    LayerSpec l;
    l.kind = kind_from_id(get_or<std::string>(o, "kind", "", "layer"));
    l.out_channels = get_or(o, "out_channels", l.out_channels, "layer");
    l.kernel = get_or(o, "kernel", l.kernel, "layer");
    l.stride = get_or(o, "stride", l.stride, "layer");
    l.window = get_or(o, "window", l.window, "layer");
    l.repeat = get_or(o, "repeat", l.repeat, "layer");
    l.growth = get_or(o, "growth", l.growth, "layer");
    spec.layers.push_back(l);
  }
  spec.validate();
  return spec;
}

json to_json(const TrainConfig& cfg) {
  return {{"batch_size", cfg.batch_size},
          {"max_epochs", cfg.max_epochs},
          {"learning_rate", cfg.learning_rate},
          {"adam", {{"beta1", cfg.adam.beta1}, {"beta2", cfg.adam.beta2}, {"epsilon", cfg.adam.epsilon}}},
          {"seed", cfg.seed}};
}

TrainConfig train_config_from_json(const json& j) {
  const std::string what = "train config";
  require_object(j, what, {"batch_size", "max_epochs", "learning_rate", "adam", "seed"});
  TrainConfig cfg;
  cfg.batch_size = get_or(j, "batch_size", cfg.batch_size, what);
  cfg.max_epochs = get_or(j, "max_epochs", cfg.max_epochs, what);
  cfg.learning_rate = get_or(j, "learning_rate", cfg.learning_rate, what);
  cfg.seed = get_or(j, "seed", cfg.seed, what);
  if (j.contains("adam")) {
    const json& a = j.at("adam");
    require_object(a, "adam options", {"beta1", "beta2", "epsilon"});
    cfg.adam.beta1 = get_or(a, "beta1", cfg.adam.beta1, "adam options");
    cfg.adam.beta2 = get_or(a, "beta2", cfg.adam.beta2, "adam options");
    cfg.adam.epsilon = get_or(a, "epsilon", cfg.adam.epsilon, "adam options");
  }
  cfg.validate();
  return cfg;
}

json read_json_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw NotFound("file not found: " + path.string());
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(path.string() + ": invalid JSON: " + e.what());
  }
}

}  // namespace imbaclass
