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

// Dataset ingestion, train/query splitting and model persistence.
//
// Feature files are header-less CSV, one sample per row. Labels are a
// one-column CSV of non-negative integers. A manifest is a key = value file:
//
//   name = uci
//   modality.1.path = mfeat-fou.csv
//   modality.1.dim = 76
//   modality.2.path = mfeat-kar.csv
//   modality.2.dim = 64
//   labels.path = labels.csv        # or labels.block_size = 200
//   split.train = 1500
//   split.query = 500               # optional, default: the rest
//   split.seed = 7                  # optional
//
// Relative paths resolve against the manifest's directory.

#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numeric>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "uch/bytes.hpp"
#include "uch/core.hpp"
#include "uch/encoder.hpp"
#include "uch/keyvalue.hpp"
#include "uch/log.hpp"
#include "uch/random.hpp"

namespace uch {

/// Parses a CSV matrix. expected_cols <= 0 takes the width of the first row.
/// Rows are numbered from 1 in error messages; blank lines are skipped.
inline Matrix parse_matrix(std::istream& in, Index expected_cols,
                           const std::string& source) {
  std::vector<double> values;
  Index cols = expected_cols;
  Index rows = 0;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    ++rows;
    Index found = 0;
    std::size_t start = 0;
    while (true) {
      const auto comma = view.find(',', start);
      const auto token = trim(view.substr(
          start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
      if (token.empty() || ec != std::errc() || ptr != token.data() + token.size())
        throw DataError(source + ": line " + std::to_string(line_no) +
                        ": non-numeric token '" + std::string(token) + "'");
      if (!std::isfinite(v))
        throw DataError(source + ": line " + std::to_string(line_no) +
                        ": non-finite value");
      values.push_back(v);
      ++found;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (cols <= 0) cols = found;
    if (found != cols)
      throw DataError(source + ": row " + std::to_string(rows) + ": expected " +
                      std::to_string(cols) + " columns, found " +
                      std::to_string(found));
  }
  if (rows == 0) throw DataError(source + ": no rows");
  Matrix out(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      out(i, j) = values[static_cast<std::size_t>(i * cols + j)];
  return out;
}

inline Matrix load_matrix(const std::filesystem::path& path, Index expected_cols) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return parse_matrix(in, expected_cols, path.string());
}

inline std::vector<int> load_labels(const std::filesystem::path& path) {
  const Matrix m = load_matrix(path, 1);
  std::vector<int> labels(static_cast<std::size_t>(m.rows()));
  for (Index i = 0; i < m.rows(); ++i) {
    const double v = m(i, 0);
    if (v < 0 || v != static_cast<double>(static_cast<int>(v)))
      throw DataError(path.string() + ": row " + std::to_string(i + 1) +
                      ": labels must be non-negative integers");
    labels[static_cast<std::size_t>(i)] = static_cast<int>(v);
  }
  return labels;
}

struct CenteredPair {
  FeatureMatrix train;
  FeatureMatrix query;
  Vector mean;
};

/// Subtracts the training column means from both matrices. The query may be
/// empty (zero rows) but must have the training width.
inline CenteredPair center_train_query(const Matrix& train, const Matrix& query,
                                       int modality_id = 1) {
  if (train.rows() < 1 || train.cols() < 1)
    throw DataError("center: training matrix is empty");
  if (query.cols() != train.cols())
    throw DataError("center: query has " + std::to_string(query.cols()) +
                    " columns, training has " + std::to_string(train.cols()));
  const Vector mean = train.colwise().mean().transpose();
  CenteredPair out;
  out.mean = mean;
  out.train = {train.rowwise() - mean.transpose(), modality_id, mean};
  out.query = {query.rowwise() - mean.transpose(), modality_id, mean};
  return out;
}

struct ModalitySource {
  int modality_id = 1;
  std::filesystem::path path;
  Index dim = 0;
};

struct DatasetManifest {
  std::string name;
  std::vector<ModalitySource> modalities;
  std::optional<std::filesystem::path> labels_path;
  std::optional<Index> label_block_size;
  Index train_count = 0;
  std::optional<Index> query_count;
  std::optional<std::uint64_t> split_seed;
};

inline DatasetManifest parse_manifest(const KeyValueFile& kv,
                                      const std::filesystem::path& base_dir) {
  static const std::regex kModalityKey(R"(modality\.([0-9]+)\.(path|dim))");
  static const std::vector<std::string> kValid = {
      "name",        "modality.<N>.path", "modality.<N>.dim", "labels.path",
      "labels.block_size", "split.train", "split.query",      "split.seed"};
  kv.check_keys(
      [](const std::string& k) {
        return k == "name" || k == "labels.path" || k == "labels.block_size" ||
               k == "split.train" || k == "split.query" || k == "split.seed" ||
               std::regex_match(k, kModalityKey);
      },
      kValid);

  const auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };

  DatasetManifest m;
  m.name = kv.get("name").value_or("dataset");
  for (int id = 1;; ++id) {
    const std::string prefix = "modality." + std::to_string(id);
    if (!kv.has(prefix + ".path") && !kv.has(prefix + ".dim")) break;
    ModalitySource src;
    src.modality_id = id;
    src.path = resolve(kv.require(prefix + ".path"));
    src.dim = parse_int(kv.require(prefix + ".dim"), prefix + ".dim");
    if (src.dim < 1) throw UsageError(prefix + ".dim must be >= 1");
    m.modalities.push_back(src);
  }
  for (const auto& [key, value] : kv.entries()) {
    std::smatch match;
    if (std::regex_match(key, match, kModalityKey) &&
        std::stoi(match[1].str()) > static_cast<int>(m.modalities.size()))
      throw UsageError(kv.source() + ": modality ids must be contiguous from 1 ('" +
                       key + "')");
  }
  if (m.modalities.empty())
    throw UsageError(kv.source() + ": manifest declares no modalities");
  if (const auto p = kv.get("labels.path")) m.labels_path = resolve(*p);
  if (const auto b = kv.get("labels.block_size")) {
    m.label_block_size = parse_int(*b, "labels.block_size");
    if (*m.label_block_size < 1) throw UsageError("labels.block_size must be >= 1");
  }
  if (!m.labels_path && !m.label_block_size)
    throw UsageError(kv.source() +
                     ": missing labels: set 'labels.path' (or 'labels.block_size')");
  m.train_count = parse_int(kv.require("split.train"), "split.train");
  if (const auto q = kv.get("split.query")) m.query_count = parse_int(*q, "split.query");
  if (const auto s = kv.get("split.seed"))
    m.split_seed = static_cast<std::uint64_t>(parse_int(*s, "split.seed"));
  return m;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  return parse_manifest(KeyValueFile::load(path), path.parent_path());
}

/// Raw (uncentered) modality matrices with one label per sample.
struct Dataset {
  std::vector<Matrix> modalities;
  std::vector<int> labels;

  Index size() const { return modalities.empty() ? 0 : modalities.front().rows(); }
};

inline Dataset load_dataset(const DatasetManifest& m) {
  Dataset ds;
  for (const auto& src : m.modalities)
    ds.modalities.push_back(load_matrix(src.path, src.dim));
  const Index n = ds.modalities.front().rows();
  for (std::size_t v = 0; v < ds.modalities.size(); ++v)
    if (ds.modalities[v].rows() != n)
      throw DataError("modality " + std::to_string(v + 1) + " has " +
                      std::to_string(ds.modalities[v].rows()) +
                      " samples, modality 1 has " + std::to_string(n));
  if (m.labels_path) {
    if (!std::filesystem::exists(*m.labels_path))
      throw DataError("labels.path: file not found '" + m.labels_path->string() + "'");
    ds.labels = load_labels(*m.labels_path);
    if (static_cast<Index>(ds.labels.size()) != n)
      throw DataError("labels.path: " + std::to_string(ds.labels.size()) +
                      " labels for " + std::to_string(n) + " samples");
  } else {
    ds.labels.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
      ds.labels[static_cast<std::size_t>(i)] = static_cast<int>(i / *m.label_block_size);
  }
  return ds;
}

struct LabeledSplit {
  std::vector<FeatureMatrix> train;
  std::vector<FeatureMatrix> query;
  std::vector<int> train_labels;
  std::vector<int> query_labels;
  std::vector<Index> train_indices;
  std::vector<Index> query_indices;

  Index train_size() const { return train.empty() ? 0 : train.front().rows(); }
  Index query_size() const { return query.empty() ? 0 : query.front().rows(); }
};

/// Seeded uniform permutation; the first train_count indices train, the next
/// query_count query. Every modality and the labels share the permutation.
inline LabeledSplit split_dataset(const Dataset& ds, Index train_count,
                                  Index query_count, std::uint64_t seed) {
  const Index n = ds.size();
  if (train_count < 2)
    throw DataError("split: need at least 2 training samples for the graph");
  if (query_count < 0 || train_count + query_count > n)
    throw DataError("split: train " + std::to_string(train_count) + " + query " +
                    std::to_string(query_count) + " exceeds " + std::to_string(n) +
                    " samples");
  if (static_cast<Index>(ds.labels.size()) != n)
    throw DataError("split: label count does not match sample count");
  if (query_count == 0) log_warn("split: query set is empty");

  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng rng(seed);
  for (Index i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<Index> pick(0, i);
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(pick(rng))]);
  }
  LabeledSplit out;
  out.train_indices.assign(perm.begin(), perm.begin() + train_count);
  out.query_indices.assign(perm.begin() + train_count,
                           perm.begin() + train_count + query_count);
  for (const Index i : out.train_indices)
    out.train_labels.push_back(ds.labels[static_cast<std::size_t>(i)]);
  for (const Index i : out.query_indices)
    out.query_labels.push_back(ds.labels[static_cast<std::size_t>(i)]);

  for (std::size_t v = 0; v < ds.modalities.size(); ++v) {
    const Matrix& src = ds.modalities[v];
    Matrix tr(train_count, src.cols());
    Matrix qu(query_count, src.cols());
    for (Index r = 0; r < train_count; ++r)
      tr.row(r) = src.row(out.train_indices[static_cast<std::size_t>(r)]);
    for (Index r = 0; r < query_count; ++r)
      qu.row(r) = src.row(out.query_indices[static_cast<std::size_t>(r)]);
    auto centered = center_train_query(tr, qu, static_cast<int>(v + 1));
    out.train.push_back(std::move(centered.train));
    out.query.push_back(std::move(centered.query));
  }
  return out;
}

/// Loads the manifest's files and splits them. fallback_seed is used when the
/// manifest does not pin split.seed.
inline LabeledSplit split_dataset(const DatasetManifest& m,
                                  std::uint64_t fallback_seed = 0) {
  const Dataset ds = load_dataset(m);
  const Index query = m.query_count.value_or(ds.size() - m.train_count);
  return split_dataset(ds, m.train_count, query, m.split_seed.value_or(fallback_seed));
}

// ---------------------------------------------------------------------------
// Model container
//
//   "UCHM" u16 version
//   u8 variant  u8 anchor_init  u32 bits  u32 modality_count  u64 n_train
//   u32 dim[modality_count]
//   f64 lambda[modality_count] rho mu gamma bandwidth ridge tol epsilon
//   i32 neighbors anchors anchor_support max_iters  u64 seed  u8 monotone_guard
//   f64 alpha[modality_count]
//   f64 mean_v[dim_v]                  for each modality
//   f64 P_v[dim_v * bits] row-major    for each modality
//   packed training codes (encoder layout)
//   u32 trace_length  f64 trace[trace_length]
//
// All integers and floats little-endian.

inline constexpr std::string_view kModelMagic = "UCHM";
inline constexpr std::uint16_t kModelVersion = 1;

struct ModelHeader {
  std::uint16_t version = 0;
  Variant variant = Variant::kLle;
  AnchorInit anchor_init = AnchorInit::kKMeans;
  int bits = 0;
  std::vector<Index> dims;
  Index train_size = 0;
};

inline std::vector<std::uint8_t> serialize_model(const UchModel& model) {
  model.validate();
  const auto v_count = static_cast<std::size_t>(model.modality_count());
  ByteWriter w;
  w.put_magic(kModelMagic);
  w.put_u16(kModelVersion);
  w.put_u8(model.variant == Variant::kLle ? 0 : 1);
  w.put_u8(model.hyper.anchor_init == AnchorInit::kKMeans ? 0 : 1);
  w.put_u32(static_cast<std::uint32_t>(model.bits()));
  w.put_u32(static_cast<std::uint32_t>(v_count));
  w.put_u64(static_cast<std::uint64_t>(model.training_codes.rows()));
  for (const auto& p : model.projections) w.put_u32(static_cast<std::uint32_t>(p.rows()));
  const auto& h = model.hyper;
  for (const double l : h.lambdas) w.put_f64(l);
  for (const double x : {h.rho, h.mu, h.gamma, h.bandwidth, h.ridge, h.tol, h.epsilon})
    w.put_f64(x);
  for (const int x : {h.neighbors, h.anchors, h.anchor_support, h.max_iters}) w.put_i32(x);
  w.put_u64(h.seed);
  w.put_u8(h.monotone_guard ? 1 : 0);
  for (std::size_t v = 0; v < v_count; ++v) w.put_f64(model.alphas(static_cast<Index>(v)));
  for (const auto& mean : model.means)
    for (Index i = 0; i < mean.size(); ++i) w.put_f64(mean(i));
  for (const auto& p : model.projections)
    for (Index i = 0; i < p.rows(); ++i)
      for (Index j = 0; j < p.cols(); ++j) w.put_f64(p(i, j));
  w.put_bytes(pack_codes(model.training_codes));
  w.put_u32(static_cast<std::uint32_t>(model.objective_trace.size()));
  for (const double t : model.objective_trace) w.put_f64(t);
  return w.bytes();
}

namespace detail {

inline ModelHeader read_model_header(ByteReader& r) {
  r.expect_magic(kModelMagic);
  ModelHeader h;
  h.version = r.u16();
  if (h.version != kModelVersion) throw DataError("unsupported model version");
  const auto variant = r.u8();
  if (variant > 1) throw DataError("model: unknown variant tag");
  h.variant = variant == 0 ? Variant::kLle : Variant::kLpp;
  h.anchor_init = r.u8() == 0 ? AnchorInit::kKMeans : AnchorInit::kRandom;
  h.bits = static_cast<int>(r.u32());
  const auto v_count = r.u32();
  h.train_size = static_cast<Index>(r.u64());
  if (h.bits < 1 || v_count < 1 || v_count > 64)
    throw DataError("model: implausible header");
  for (std::uint32_t v = 0; v < v_count; ++v) h.dims.push_back(r.u32());
  return h;
}

}  // namespace detail

inline UchModel deserialize_model(std::span<const std::uint8_t> bytes,
                                  const std::string& what = "model file") {
  ByteReader r(bytes, what);
  const ModelHeader header = detail::read_model_header(r);

  UchModel m;
  m.variant = header.variant;
  const auto v_count = header.dims.size();
  auto& h = m.hyper;
  h.anchor_init = header.anchor_init;
  h.lambdas.resize(v_count);
  for (auto& l : h.lambdas) l = r.f64();
  for (double* x : {&h.rho, &h.mu, &h.gamma, &h.bandwidth, &h.ridge, &h.tol, &h.epsilon})
    *x = r.f64();
  for (int* x : {&h.neighbors, &h.anchors, &h.anchor_support, &h.max_iters}) *x = r.i32();
  h.seed = r.u64();
  h.monotone_guard = r.u8() != 0;
  m.alphas.resize(static_cast<Index>(v_count));
  for (std::size_t v = 0; v < v_count; ++v) m.alphas(static_cast<Index>(v)) = r.f64();
  for (const Index d : header.dims) {
    Vector mean(d);
    for (Index i = 0; i < d; ++i) mean(i) = r.f64();
    m.means.push_back(std::move(mean));
  }
  for (const Index d : header.dims) {
    Matrix p(d, header.bits);
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < header.bits; ++j) p(i, j) = r.f64();
    m.projections.push_back(std::move(p));
  }
  const auto packed = r.take(packed_row_bytes(header.bits) *
                             static_cast<std::size_t>(header.train_size));
  m.training_codes = unpack_codes(packed, header.train_size, header.bits);
  const auto trace_len = r.u32();
  for (std::uint32_t t = 0; t < trace_len; ++t) m.objective_trace.push_back(r.f64());
  r.expect_end();
  m.validate();
  return m;
}

inline void save_model(const UchModel& model, const std::filesystem::path& path) {
  ByteWriter w;
  w.put_bytes(serialize_model(model));
  w.write_file(path);
}

inline UchModel load_model(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return deserialize_model(bytes, "model file '" + path.string() + "'");
}

inline ModelHeader read_model_header(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  ByteReader r(bytes, "model file '" + path.string() + "'");
  return detail::read_model_header(r);
}

}  // namespace uch
