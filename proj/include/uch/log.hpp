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

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>
#include <string_view>

namespace uch {

enum class LogLevel { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

// Verbosity comes from the UCH_LOG environment variable
// (error|warn|info|debug); default is warn.
inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("UCH_LOG");
    if (env == nullptr) return LogLevel::kWarn;
    const std::string_view v(env);
    if (v == "error") return LogLevel::kError;
    if (v == "info") return LogLevel::kInfo;
    if (v == "debug") return LogLevel::kDebug;
    return LogLevel::kWarn;
  }();
  return level;
}

inline void log(LogLevel level, std::string_view message) {
  if (static_cast<int>(level) > static_cast<int>(log_level())) return;
  static std::mutex mu;
  static constexpr const char* kNames[] = {"error", "warn", "info", "debug"};
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "[uch:" << kNames[static_cast<int>(level)] << "] " << message
            << '\n';
}

inline void log_warn(std::string_view message) { log(LogLevel::kWarn, message); }
inline void log_info(std::string_view message) { log(LogLevel::kInfo, message); }
inline void log_debug(std::string_view message) {
  log(LogLevel::kDebug, message);
}

}  // namespace uch
