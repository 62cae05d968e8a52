// Copyright 2026 The decouple Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace decouple {

/// Category attached to every error raised by the library.
enum class ErrorKind {
  dimension_mismatch,
  unknown_label,
  invalid_argument,
  not_positive_semidefinite,
  precondition_violated,
  infeasible,
  memory_cap_exceeded,
  config,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::dimension_mismatch: return "dimension_mismatch";
    case ErrorKind::unknown_label: return "unknown_label";
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::not_positive_semidefinite: return "not_positive_semidefinite";
    case ErrorKind::precondition_violated: return "precondition_violated";
    case ErrorKind::infeasible: return "infeasible";
    case ErrorKind::memory_cap_exceeded: return "memory_cap_exceeded";
    case ErrorKind::config: return "config";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace decouple
