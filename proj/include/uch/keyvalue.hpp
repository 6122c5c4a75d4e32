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

// Flat "key = value" text files used for manifests and run configs.
// '#' starts a comment; blank lines are ignored; keys are unique.

#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "uch/error.hpp"

namespace uch {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline double parse_double(std::string_view text, std::string_view what) {
  const auto t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw UsageError(std::string(what) + ": not a number: '" + std::string(t) + "'");
  return v;
}

inline std::int64_t parse_int(std::string_view text, std::string_view what) {
  const auto t = trim(text);
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw UsageError(std::string(what) + ": not an integer: '" + std::string(t) + "'");
  return v;
}

inline bool parse_bool(std::string_view text, std::string_view what) {
  const auto t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw UsageError(std::string(what) + ": not a boolean: '" + std::string(t) + "'");
}

inline std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto item = trim(text.substr(
        start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

class KeyValueFile {
 public:
  static KeyValueFile parse(std::istream& in, const std::string& source) {
    KeyValueFile kv;
    kv.source_ = source;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::string_view view(line);
      if (const auto hash = view.find('#'); hash != std::string_view::npos)
        view = view.substr(0, hash);
      view = trim(view);
      if (view.empty()) continue;
      const auto eq = view.find('=');
      if (eq == std::string_view::npos)
        throw UsageError(source + ":" + std::to_string(line_no) +
                         ": expected 'key = value'");
      const std::string key(trim(view.substr(0, eq)));
      if (key.empty())
        throw UsageError(source + ":" + std::to_string(line_no) + ": empty key");
      if (kv.values_.count(key) != 0)
        throw UsageError(source + ":" + std::to_string(line_no) +
                         ": duplicate key '" + key + "'");
      kv.values_[key] = std::string(trim(view.substr(eq + 1)));
    }
    return kv;
  }

  static KeyValueFile parse_text(const std::string& text, const std::string& source) {
    std::istringstream in(text);
    return parse(in, source);
  }

  static KeyValueFile load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    return parse(in, path.string());
  }

  const std::string& source() const { return source_; }
  const std::map<std::string, std::string>& entries() const { return values_; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::optional<std::string> get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& require(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end())
      throw UsageError(source_ + ": missing required key '" + key + "'");
    return it->second;
  }

  /// Rejects any key not accepted by `allowed`, listing the valid keys.
  template <typename Pred>
  void check_keys(Pred allowed, const std::vector<std::string>& valid) const {
    for (const auto& [key, value] : values_) {
      if (allowed(key)) continue;
      std::string msg = source_ + ": invalid key '" + key + "'; valid keys:";
      for (const auto& v : valid) msg += " " + v;
      throw UsageError(msg);
    }
  }

 private:
  std::string source_;
  std::map<std::string, std::string> values_;
};

}  // namespace uch
