// Copyright 2026 The UCH Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

namespace uch {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad invocation: unknown config key, malformed flag, invalid argument.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Input data problem: unreadable file, wrong arity, dimension mismatch.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: singular system, non-finite values.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// CLI exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NumericalError*>(&e) != nullptr) return kExitNumerical;
  if (dynamic_cast<const DataError*>(&e) != nullptr) return kExitData;
  if (dynamic_cast<const std::filesystem::filesystem_error*>(&e) != nullptr) return kExitData;
  return kExitUsage;
}

}  // namespace uch
