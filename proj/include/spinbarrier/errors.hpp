// Copyright 2026 The spinbarrier Authors
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

namespace spinbarrier {

/// Failure categories; the numeric values are the CLI exit codes.
enum class ErrorCategory : int {
  config = 2,
  drift = 3,
  scientific = 4,
  io = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what) : std::runtime_error(what), category_(category) {}
  [[nodiscard]] ErrorCategory category() const { return category_; }
  [[nodiscard]] int exit_code() const { return static_cast<int>(category_); }

 private:
  ErrorCategory category_;
};

/// Norm or trace drift beyond the hard limit: the step is too large.
class DriftError : public Error {
 public:
  explicit DriftError(const std::string& what) : Error(ErrorCategory::drift, what) {}
};

class ConfigError : public Error {
 public:
  enum class Kind { missing_file, syntax, unknown_key, bad_value, invariant };

  ConfigError(Kind kind, const std::string& what) : Error(ErrorCategory::config, what), kind_(kind) {}
  [[nodiscard]] Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCategory::io, what) {}
};

}  // namespace spinbarrier
