// Copyright 2026 The restp Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace restp {

enum class ErrorCategory {
  dimension,  // tensor/layer shape mismatch
  numeric,    // NaN/Inf encountered
  domain,     // value outside the valid domain (labels, class counts)
  config,     // invalid configuration
  io,         // filesystem failure
  format      // corrupt or unrecognized file contents
};

inline const char* error_prefix(ErrorCategory cat) {
  switch (cat) {
    case ErrorCategory::dimension: return "dimension error: ";
    case ErrorCategory::numeric: return "numeric error: ";
    case ErrorCategory::domain: return "domain error: ";
    case ErrorCategory::config: return "config error: ";
    case ErrorCategory::io: return "io error: ";
    case ErrorCategory::format: return "format error: ";
  }
  return "error: ";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory cat, const std::string& msg)
      : std::runtime_error(error_prefix(cat) + msg), cat_(cat) {}

  ErrorCategory category() const { return cat_; }

 private:
  ErrorCategory cat_;
};

struct DimensionError : Error {
  explicit DimensionError(const std::string& m) : Error(ErrorCategory::dimension, m) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& m) : Error(ErrorCategory::numeric, m) {}
};
struct DomainError : Error {
  explicit DomainError(const std::string& m) : Error(ErrorCategory::domain, m) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error(ErrorCategory::config, m) {}
};
struct IoError : Error {
  explicit IoError(const std::string& m) : Error(ErrorCategory::io, m) {}
};
struct FormatError : Error {
  explicit FormatError(const std::string& m) : Error(ErrorCategory::format, m) {}
};

}  // namespace restp
