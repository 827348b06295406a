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

#ifndef IMBACLASS_JSON_IO_HPP_
#define IMBACLASS_JSON_IO_HPP_

#include <nlohmann/json.hpp>

#include "imbaclass/losses.hpp"
#include "imbaclass/nn.hpp"

namespace imbaclass {

// {"family":"focal","alpha":1.5,"gamma":2.0}; missing fields take defaults.
nlohmann::json to_json(const LossConfig& cfg);
LossConfig loss_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const NetworkSpec& spec);
NetworkSpec network_spec_from_json(const nlohmann::json& j);

// batch_size, max_epochs, learning_rate, adam{beta1,beta2,epsilon}, seed.
// The loss is configured separately per method.
nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

// Reads a JSON document; NotFound for a missing file, InvalidArgument for a
// parse error (message carries the path).
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace imbaclass

#endif  // IMBACLASS_JSON_IO_HPP_
