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

// Little-endian byte buffers for the binary container formats.

#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uch/error.hpp"

namespace uch {

class ByteWriter {
 public:
  void put_bytes(std::span<const std::uint8_t> bytes) {
    buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
  }
  void put_magic(std::string_view magic) {
    for (const char c : magic) buffer_.push_back(static_cast<std::uint8_t>(c));
  }
  void put_u8(std::uint8_t v) { buffer_.push_back(v); }
  void put_u16(std::uint16_t v) { put_le(v, 2); }
  void put_u32(std::uint32_t v) { put_le(v, 4); }
  void put_u64(std::uint64_t v) { put_le(v, 8); }
  void put_i32(std::int32_t v) { put_u32(static_cast<std::uint32_t>(v)); }
  void put_f64(double v) { put_u64(std::bit_cast<std::uint64_t>(v)); }

  const std::vector<std::uint8_t>& bytes() const { return buffer_; }

  void write_file(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(buffer_.data()),
              static_cast<std::streamsize>(buffer_.size()));
    if (!out) throw DataError("failed writing '" + path.string() + "'");
  }

 private:
  void put_le(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i)
      buffer_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xffu));
  }

  std::vector<std::uint8_t> buffer_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, std::string what)
      : bytes_(bytes), what_(std::move(what)) {}

  std::span<const std::uint8_t> take(std::size_t count) {
    if (count > bytes_.size() - pos_)
      throw DataError("truncated " + what_);
    const auto out = bytes_.subspan(pos_, count);
    pos_ += count;
    return out;
  }
  void expect_magic(std::string_view magic) {
    const auto got = take(magic.size());
    for (std::size_t i = 0; i < magic.size(); ++i)
      if (got[i] != static_cast<std::uint8_t>(magic[i]))
        throw DataError("bad magic in " + what_ + " (expected '" +
                        std::string(magic) + "')");
  }
  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

  bool at_end() const { return pos_ == bytes_.size(); }
  void expect_end() const {
    if (!at_end()) throw DataError("trailing bytes in " + what_);
  }

 private:
  std::uint64_t le(int width) {
    const auto b = take(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::string what_;
};

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace uch
