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

// Run configuration: one flat key = value file, keys namespaced data.*,
// model.*, train.*, eval.*, sweep.*. See kConfigKeys for the full list.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "uch/core.hpp"
#include "uch/keyvalue.hpp"
#include "uch/retrieval.hpp"
#include "uch/trainer.hpp"

namespace uch {

inline const std::vector<std::string> kConfigKeys = {
    "data.manifest",
    "model.variant",     "model.bits",         "model.lambda",
    "model.lambda1",     "model.lambda2",      "model.rho",
    "model.mu",          "model.gamma",        "model.neighbors",
    "model.anchors",     "model.anchor_support", "model.bandwidth",
    "model.ridge",       "model.anchor_init",
    "train.max_iters",   "train.tol",          "train.epsilon",
    "train.seed",        "train.monotone_guard", "train.output_dir",
    "eval.tasks",        "eval.r_cutoff",      "eval.database",
    "sweep.variant",     "sweep.bits",         "sweep.lambda",
    "sweep.lambda1",     "sweep.lambda2",      "sweep.rho",
    "sweep.neighbors",   "sweep.anchors",      "sweep.workers",
    "sweep.output"};

struct SweepGrid {
  std::vector<Variant> variants;
  std::vector<int> bits;
  std::vector<double> lambda1;
  std::vector<double> lambda2;  // empty: tied to lambda1
  std::vector<double> rho;
  std::vector<int> neighbors;
  std::vector<int> anchors;
};

struct RunConfig {
  std::filesystem::path manifest;
  TrainConfig train;
  std::filesystem::path output_dir;
  std::vector<Task> tasks{Task::kI2T, Task::kT2I};
  std::optional<Index> r_cutoff;
  DatabaseMode database = DatabaseMode::kTrainingCodes;
  SweepGrid sweep;
  unsigned workers = 1;
  std::filesystem::path sweep_output;
  KeyValueFile source;
};

inline std::vector<Task> parse_tasks(const std::string& text) {
  std::vector<Task> out;
  for (const auto& t : split_list(text)) out.push_back(parse_task(t));
  if (out.empty()) throw UsageError("no tasks given");
  return out;
}

inline DatabaseMode parse_database_mode(const std::string& text) {
  if (text == "train-codes") return DatabaseMode::kTrainingCodes;
  if (text == "encoded") return DatabaseMode::kEncodedTrain;
  throw UsageError("eval.database must be train-codes or encoded");
}

inline RunConfig parse_run_config(const KeyValueFile& kv,
                                  const std::filesystem::path& base_dir) {
  kv.check_keys(
      [](const std::string& k) {
        for (const auto& valid : kConfigKeys)
          if (k == valid) return true;
        return false;
      },
      kConfigKeys);
  const auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  const auto num = [&](const std::string& key, double fallback) {
    const auto v = kv.get(key);
    return v ? parse_double(*v, key) : fallback;
  };
  const auto integer = [&](const std::string& key, std::int64_t fallback) {
    const auto v = kv.get(key);
    return v ? parse_int(*v, key) : fallback;
  };
  const auto doubles = [&](const std::string& key) {
    std::vector<double> out;
    if (const auto v = kv.get(key))
      for (const auto& item : split_list(*v)) out.push_back(parse_double(item, key));
    return out;
  };
  const auto ints = [&](const std::string& key) {
    std::vector<int> out;
    if (const auto v = kv.get(key))
      for (const auto& item : split_list(*v))
        out.push_back(static_cast<int>(parse_int(item, key)));
    return out;
  };

  RunConfig c;
  c.source = kv;
  if (const auto m = kv.get("data.manifest")) c.manifest = resolve(*m);

  auto& t = c.train;
  auto& h = t.hyper;
  if (const auto v = kv.get("model.variant")) t.variant = parse_variant(*v);
  t.bits = static_cast<int>(integer("model.bits", t.bits));
  const double lambda = num("model.lambda", 1.0);
  h.lambdas = {num("model.lambda1", lambda), num("model.lambda2", lambda)};
  h.rho = num("model.rho", h.rho);
  h.mu = num("model.mu", h.mu);
  h.gamma = num("model.gamma", h.gamma);
  h.neighbors = static_cast<int>(integer("model.neighbors", h.neighbors));
  h.anchors = static_cast<int>(integer("model.anchors", h.anchors));
  h.anchor_support = static_cast<int>(integer("model.anchor_support", h.anchor_support));
  h.bandwidth = num("model.bandwidth", h.bandwidth);
  h.ridge = num("model.ridge", h.ridge);
  if (const auto v = kv.get("model.anchor_init")) h.anchor_init = parse_anchor_init(*v);
  h.max_iters = static_cast<int>(integer("train.max_iters", h.max_iters));
  h.tol = num("train.tol", h.tol);
  h.epsilon = num("train.epsilon", h.epsilon);
  h.seed = static_cast<std::uint64_t>(integer("train.seed", 0));
  if (const auto v = kv.get("train.monotone_guard"))
    h.monotone_guard = parse_bool(*v, "train.monotone_guard");
  c.output_dir = resolve(kv.get("train.output_dir").value_or("runs"));

  if (const auto v = kv.get("eval.tasks")) c.tasks = parse_tasks(*v);
  if (const auto v = kv.get("eval.r_cutoff")) c.r_cutoff = parse_int(*v, "eval.r_cutoff");
  if (const auto v = kv.get("eval.database")) c.database = parse_database_mode(*v);

  auto& s = c.sweep;
  if (const auto v = kv.get("sweep.variant"))
    for (const auto& item : split_list(*v)) s.variants.push_back(parse_variant(item));
  if (s.variants.empty()) s.variants = {t.variant};
  s.bits = ints("sweep.bits");
  if (s.bits.empty()) s.bits = {t.bits};
  s.lambda1 = doubles("sweep.lambda");
  if (s.lambda1.empty()) {
    s.lambda1 = doubles("sweep.lambda1");
    s.lambda2 = doubles("sweep.lambda2");
    if (s.lambda1.empty()) s.lambda1 = {h.lambdas[0]};
    if (s.lambda2.empty()) s.lambda2 = {h.lambdas[1]};
  } else if (kv.has("sweep.lambda1") || kv.has("sweep.lambda2")) {
    throw UsageError("sweep.lambda ties both lambdas; do not combine it with "
                     "sweep.lambda1 / sweep.lambda2");
  }
  s.rho = doubles("sweep.rho");
  if (s.rho.empty()) s.rho = {h.rho};
  s.neighbors = ints("sweep.neighbors");
  if (s.neighbors.empty()) s.neighbors = {h.neighbors};
  s.anchors = ints("sweep.anchors");
  if (s.anchors.empty()) s.anchors = {h.anchors};
  c.workers = static_cast<unsigned>(integer("sweep.workers", 1));
  if (c.workers < 1) throw UsageError("sweep.workers must be >= 1");
  c.sweep_output = kv.has("sweep.output") ? resolve(*kv.get("sweep.output"))
                                          : c.output_dir / "sweep.csv";
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(KeyValueFile::load(path), path.parent_path());
}

}  // namespace uch
