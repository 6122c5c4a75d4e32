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

// Out-of-sample hashing and the packed bit layout.
//
// Packed layout: one row after another, ceil(r / 8) bytes per row. Bit j of a
// code lives in byte j / 8 at bit position j % 8; a set bit means +1. Padding
// bits are zero.

#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "uch/bytes.hpp"
#include "uch/core.hpp"

namespace uch {

inline std::size_t packed_row_bytes(int bits) {
  return static_cast<std::size_t>((bits + 7) / 8);
}

inline std::vector<std::uint8_t> pack_codes(const CodeMatrix& codes) {
  const std::size_t stride = packed_row_bytes(codes.bits());
  std::vector<std::uint8_t> out(stride * static_cast<std::size_t>(codes.rows()), 0);
  for (Index i = 0; i < codes.rows(); ++i)
    for (int j = 0; j < codes.bits(); ++j)
      if (codes(i, j) > 0)
        out[static_cast<std::size_t>(i) * stride + static_cast<std::size_t>(j / 8)] |=
            static_cast<std::uint8_t>(1u << (j % 8));
  return out;
}

inline CodeMatrix unpack_codes(std::span<const std::uint8_t> bytes, Index rows,
                               int bits) {
  if (rows < 0 || bits < 1) throw DataError("unpack: invalid code shape");
  const std::size_t stride = packed_row_bytes(bits);
  if (bytes.size() != stride * static_cast<std::size_t>(rows))
    throw DataError("unpack: " + std::to_string(bytes.size()) +
                    " bytes do not match " + std::to_string(rows) + " x " +
                    std::to_string(bits) + " codes");
  CodeStorage codes(rows, bits);
  for (Index i = 0; i < rows; ++i)
    for (int j = 0; j < bits; ++j) {
      const auto byte =
          bytes[static_cast<std::size_t>(i) * stride + static_cast<std::size_t>(j / 8)];
      codes(i, j) = ((byte >> (j % 8)) & 1u) != 0 ? std::int8_t{1} : std::int8_t{-1};
    }
  return CodeMatrix(std::move(codes));
}

/// Codes packed into 64-bit words for popcount distances.
class PackedCodes {
 public:
  explicit PackedCodes(const CodeMatrix& codes)
      : rows_(codes.rows()),
        bits_(codes.bits()),
        words_((codes.bits() + 63) / 64),
        data_(static_cast<std::size_t>(rows_ * words_), 0) {
    for (Index i = 0; i < rows_; ++i)
      for (int j = 0; j < bits_; ++j)
        if (codes(i, j) > 0)
          data_[static_cast<std::size_t>(i * words_ + j / 64)] |= std::uint64_t{1}
                                                                  << (j % 64);
  }

  Index rows() const { return rows_; }
  int bits() const { return bits_; }

  std::span<const std::uint64_t> row(Index i) const {
    return {data_.data() + i * words_, static_cast<std::size_t>(words_)};
  }

  static int distance(std::span<const std::uint64_t> a,
                      std::span<const std::uint64_t> b) {
    int d = 0;
    for (std::size_t w = 0; w < a.size(); ++w) d += std::popcount(a[w] ^ b[w]);
    return d;
  }

 private:
  Index rows_;
  int bits_;
  Index words_;
  std::vector<std::uint64_t> data_;
};

/// sign(x * P_v). When `raw` is set, x is first centered with the model's
/// training mean for that modality.
inline CodeMatrix encode(const UchModel& model, const Matrix& x, int modality_id,
                         bool raw = false) {
  model.check_modality(modality_id);
  const Matrix& p = model.projections[static_cast<std::size_t>(modality_id - 1)];
  if (x.cols() != p.rows())
    throw DataError("encode: modality " + std::to_string(modality_id) +
                    " expects " + std::to_string(p.rows()) + " columns, got " +
                    std::to_string(x.cols()));
  if (raw) {
    const Matrix centered =
        x.rowwise() - model.means[static_cast<std::size_t>(modality_id - 1)].transpose();
    return sign_quantize(centered * p);
  }
  return sign_quantize(x * p);
}

inline CodeMatrix encode(const UchModel& model, const FeatureMatrix& x,
                         bool raw = false) {
  return encode(model, x.data, x.modality_id, raw);
}

inline constexpr std::string_view kCodeMagic = "UCHC";

/// Code file: "UCHC", u64 n, u32 r, then the packed rows.
inline void write_code_file(const std::filesystem::path& path,
                            const CodeMatrix& codes) {
  ByteWriter w;
  w.put_magic(kCodeMagic);
  w.put_u64(static_cast<std::uint64_t>(codes.rows()));
  w.put_u32(static_cast<std::uint32_t>(codes.bits()));
  w.put_bytes(pack_codes(codes));
  w.write_file(path);
}

inline CodeMatrix read_code_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  ByteReader r(bytes, "code file '" + path.string() + "'");
  r.expect_magic(kCodeMagic);
  const auto rows = r.u64();
  const auto bits = r.u32();
  if (bits == 0) throw DataError("code file declares zero bits");
  const auto body = r.take(packed_row_bytes(static_cast<int>(bits)) * rows);
  r.expect_end();
  return unpack_codes(body, static_cast<Index>(rows), static_cast<int>(bits));
}

}  // namespace uch
