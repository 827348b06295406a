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

#include "imbaclass/log.hpp"

#include <cstdlib>
#include <string>

#include <spdlog/sinks/stdout_sinks.h>

#include "imbaclass/error.hpp"

namespace imbaclass {

namespace {

spdlog::level::level_enum parse_level(std::string_view name) {
  const auto level = spdlog::level::from_str(std::string(name));
  // from_str maps unknown names to off; only accept "off" when asked for.
  if (level == spdlog::level::off && name != "off")
    throw InvalidArgument("unknown log level '" + std::string(name) +
                          "' (expected trace, debug, info, warn, error or off)");
  return level;
}

std::shared_ptr<spdlog::logger> make_logger() {
  auto logger = std::make_shared<spdlog::logger>(
      "imbaclass", std::make_shared<spdlog::sinks::stderr_sink_mt>());
  logger->set_pattern("[%H:%M:%S.%e] [%l] %v");
  auto level = spdlog::level::warn;
  if (const char* env = std::getenv("IMBACLASS_LOG"); env && *env) {
    try {
      level = parse_level(env);
    } catch (const InvalidArgument&) {
      logger->warn("ignoring IMBACLASS_LOG={}", env);
    }
  }
  logger->set_level(level);
  return logger;
}

}  // namespace

spdlog::logger& log() {
  static const std::shared_ptr<spdlog::logger> logger = make_logger();
  return *logger;
}

void set_log_level(std::string_view level) { log().set_level(parse_level(level)); }

}  // namespace imbaclass
