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

#ifndef IMBACLASS_ERROR_HPP_
#define IMBACLASS_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace imbaclass {

// Caller passed something that violates a documented precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A named input (file, directory) does not exist.
class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A request cannot be satisfied with the available room (e.g. packing cells
// into a smear).
class CapacityError : public std::runtime_error {
 public:
  CapacityError(const std::string& what, long max_feasible)
      : std::runtime_error(what), max_feasible_(max_feasible) {}
  long max_feasible() const noexcept { return max_feasible_; }

 private:
  long max_feasible_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define IMBACLASS_REQUIRE(cond, msg)              \
  do {                                            \
    if (!(cond)) throw ::imbaclass::InvalidArgument(msg); \
  } while (0)

}  // namespace imbaclass

#endif  // IMBACLASS_ERROR_HPP_
