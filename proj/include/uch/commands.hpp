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

// Batch commands behind the `uch` executable. Each returns its results and
// writes its artifacts; exit-code mapping lives in cli.hpp.

#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "uch/config.hpp"
#include "uch/dataio.hpp"
#include "uch/encoder.hpp"
#include "uch/graph.hpp"
#include "uch/log.hpp"
#include "uch/retrieval.hpp"
#include "uch/trainer.hpp"

namespace uch {

/// Seed of the train/query permutation: the manifest's split.seed when set,
/// else derived from the run seed.
inline std::uint64_t split_seed_for(const DatasetManifest& m, std::uint64_t run_seed) {
  return m.split_seed.value_or(derive_seed(run_seed, "split"));
}

inline LabeledSplit load_split(const DatasetManifest& m, std::uint64_t run_seed) {
  const Dataset ds = load_dataset(m);
  const Index query = m.query_count.value_or(ds.size() - m.train_count);
  return split_dataset(ds, m.train_count, query, split_seed_for(m, run_seed));
}

/// Shortest round-trip decimal form of a double.
inline std::string format_number(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace detail {

// Writes through a sibling temp file so readers never see a partial file.
inline void write_atomically(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw DataError("write failed for '" + path.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline std::filesystem::path next_run_dir(const std::filesystem::path& root) {
  std::filesystem::create_directories(root);
  for (int id = 1;; ++id) {
    std::ostringstream name;
    name << "run-" << std::setw(4) << std::setfill('0') << id;
    const auto dir = root / name.str();
    if (std::filesystem::create_directory(dir)) return dir;
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// train

struct TrainOutcome {
  std::filesystem::path run_dir;
  std::filesystem::path model_path;
  std::filesystem::path log_path;
  std::filesystem::path metadata_path;
  UchModel model;
};

inline TrainOutcome cmd_train(const RunConfig& config) {
  if (config.manifest.empty()) throw UsageError("config is missing 'data.manifest'");
  const auto start = std::chrono::steady_clock::now();
  const DatasetManifest manifest = load_manifest(config.manifest);
  const std::uint64_t seed = config.train.hyper.seed;
  const LabeledSplit split = load_split(manifest, seed);

  TrainOutcome out;
  out.run_dir = detail::next_run_dir(config.output_dir);
  out.model_path = out.run_dir / "model.uchm";
  out.log_path = out.run_dir / "train_log.csv";
  out.metadata_path = out.run_dir / "run.json";

  TrainConfig cfg = config.train;
  cfg.log_path = out.log_path;
  out.model = train(split, cfg);
  save_model(out.model, out.model_path);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  nlohmann::ordered_json meta;
  meta["config_file"] = config.source.source();
  meta["config"] = config.source.entries();
  meta["seed"] = seed;
  meta["split_seed"] = split_seed_for(manifest, seed);
  meta["variant"] = std::string(to_string(out.model.variant));
  meta["bits"] = out.model.bits();
  std::vector<Index> dims;
  for (int v = 1; v <= out.model.modality_count(); ++v) dims.push_back(out.model.dim(v));
  meta["dims"] = dims;
  meta["train_size"] = split.train_size();
  meta["query_size"] = split.query_size();
  meta["iterations"] = out.model.objective_trace.size();
  meta["final_objective"] = out.model.objective_trace.back();
  meta["wall_time_seconds"] = wall;
  meta["model"] = out.model_path.filename().string();
  meta["training_log"] = out.log_path.filename().string();
  detail::write_atomically(out.metadata_path, meta.dump(2) + "\n");
  log_info("train: wrote " + out.run_dir.string());
  return out;
}

inline TrainOutcome cmd_train(const std::filesystem::path& config_path) {
  return cmd_train(load_run_config(config_path));
}

// ---------------------------------------------------------------------------
// eval

/// Rebuilds the model's train/query split from the manifest and scores each
/// task. Nothing is written here, so a failure never leaves a partial report.
inline std::vector<RetrievalReport> cmd_eval(
    const std::filesystem::path& model_path, const std::filesystem::path& manifest_path,
    const std::vector<Task>& tasks, std::optional<Index> r_cutoff = std::nullopt,
    DatabaseMode mode = DatabaseMode::kTrainingCodes) {
  if (tasks.empty()) throw UsageError("no tasks given");
  const UchModel model = load_model(model_path);
  const DatasetManifest manifest = load_manifest(manifest_path);
  if (manifest.modalities.size() != static_cast<std::size_t>(model.modality_count()))
    throw DataError("manifest has " + std::to_string(manifest.modalities.size()) +
                    " modalities, model has " + std::to_string(model.modality_count()));
  for (const auto& src : manifest.modalities)
    if (src.dim != model.dim(src.modality_id))
      throw DataError("modality " + std::to_string(src.modality_id) + ": manifest dim " +
                      std::to_string(src.dim) + ", model dim " +
                      std::to_string(model.dim(src.modality_id)));
  const LabeledSplit split = load_split(manifest, model.hyper.seed);
  std::vector<RetrievalReport> reports;
  for (const Task t : tasks) reports.push_back(evaluate_task(model, split, t, r_cutoff, mode));
  return reports;
}

inline std::string report_csv(const std::vector<RetrievalReport>& reports) {
  std::ostringstream os;
  write_report_csv(reports, os);
  return os.str();
}

// ---------------------------------------------------------------------------
// encode

/// Encodes a raw (uncentered) feature CSV; the model's training mean is
/// subtracted unless `centered` is set.
inline CodeMatrix cmd_encode(const std::filesystem::path& model_path,
                             const std::filesystem::path& input, int modality_id,
                             const std::filesystem::path& output, bool centered = false) {
  const UchModel model = load_model(model_path);
  model.check_modality(modality_id);
  const Matrix x = load_matrix(input, model.dim(modality_id));
  CodeMatrix codes = encode(model, x, modality_id, !centered);
  if (output.has_parent_path()) std::filesystem::create_directories(output.parent_path());
  write_code_file(output, codes);
  return codes;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepPoint {
  Variant variant = Variant::kLle;
  int bits = 0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double rho = 0.0;
  int graph_size = 0;  // K for lle, m for lpp

  std::string key() const {
    return std::string(to_string(variant)) + ',' + std::to_string(bits) + ',' +
           format_number(lambda1) + ',' + format_number(lambda2) + ',' +
           format_number(rho) + ',' + std::to_string(graph_size);
  }
};

struct SweepRow {
  std::string key;  // the six parameter columns, as written
  std::vector<double> maps;
  double average = 0.0;
  int iterations = 0;
};

struct SweepOutcome {
  std::vector<SweepRow> rows;  // sorted by average MAP, best first
  int trained = 0;
  int skipped = 0;
};

inline std::vector<SweepPoint> sweep_points(const RunConfig& c) {
  const auto& g = c.sweep;
  std::vector<SweepPoint> out;
  for (const Variant v : g.variants)
    for (const int bits : g.bits)
      for (const double l1 : g.lambda1)
        for (const double l2 : g.lambda2.empty() ? std::vector<double>{l1} : g.lambda2)
          for (const double rho : g.rho)
            for (const int size : v == Variant::kLle ? g.neighbors : g.anchors)
              out.push_back({v, bits, l1, l2, rho, size});
  return out;
}

inline std::string sweep_header(const std::vector<Task>& tasks) {
  std::string h = "variant,bits,lambda1,lambda2,rho,graph_size";
  for (const Task t : tasks) h += ",map_" + std::string(to_string(t));
  return h + ",map_avg,iterations";
}

namespace detail {

inline std::string sweep_line(const SweepRow& row) {
  std::string line = row.key;
  for (const double m : row.maps) line += ',' + format_number(m);
  return line + ',' + format_number(row.average) + ',' + std::to_string(row.iterations);
}

inline std::vector<SweepRow> read_sweep_rows(const std::filesystem::path& path,
                                             const std::string& header,
                                             std::size_t task_count) {
  std::vector<SweepRow> rows;
  std::ifstream in(path);
  if (!in) return rows;
  std::string line;
  if (!std::getline(in, line)) return rows;
  if (line != header)
    throw UsageError("sweep output '" + path.string() +
                     "' has a different header; choose another sweep.output");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
    // A truncated trailing line from an interrupted run is dropped and redone.
    if (fields.size() != 6 + task_count + 2) continue;
    SweepRow row;
    for (std::size_t k = 0; k < 6; ++k) row.key += (k ? "," : "") + fields[k];
    try {
      for (std::size_t k = 0; k < task_count; ++k)
        row.maps.push_back(parse_double(fields[6 + k], "map"));
      row.average = parse_double(fields[6 + task_count], "map_avg");
      row.iterations = static_cast<int>(parse_int(fields[7 + task_count], "iterations"));
    } catch (const UsageError&) {
      continue;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

/// Trains and evaluates every grid point not already present in the output
/// CSV, appending one row per finished point, then rewrites the file sorted
/// by average MAP (best first).
inline SweepOutcome cmd_sweep(const RunConfig& config,
                              std::optional<unsigned> workers_override = std::nullopt) {
  if (config.manifest.empty()) throw UsageError("config is missing 'data.manifest'");
  const unsigned workers = workers_override.value_or(config.workers);
  if (workers < 1) throw UsageError("workers must be >= 1");
  const auto& tasks = config.tasks;
  const std::string header = sweep_header(tasks);
  const auto out_path = config.sweep_output;

  std::vector<SweepRow> done = detail::read_sweep_rows(out_path, header, tasks.size());
  std::map<std::string, bool> have;
  for (const auto& r : done) have[r.key] = true;

  std::vector<SweepPoint> pending;
  SweepOutcome outcome;
  for (const auto& p : sweep_points(config)) {
    if (have.count(p.key()) != 0) {
      ++outcome.skipped;
      continue;
    }
    have[p.key()] = true;
    pending.push_back(p);
  }

  if (!pending.empty()) {
    const DatasetManifest manifest = load_manifest(config.manifest);
    const LabeledSplit split = load_split(manifest, config.train.hyper.seed);
    const ConcatenatedFeatures y = concatenate(split.train);

    const auto hyper_for = [&](const SweepPoint& p) {
      Hyperparams h = config.train.hyper;
      h.lambdas = {p.lambda1, p.lambda2};
      h.rho = p.rho;
      (p.variant == Variant::kLle ? h.neighbors : h.anchors) = p.graph_size;
      return h;
    };
    // Graphs depend only on (variant, K or m); build each once.
    std::map<std::pair<Variant, int>, AffinityGraph> graphs;
    for (const auto& p : pending) {
      const auto gk = std::make_pair(p.variant, p.graph_size);
      if (graphs.count(gk) == 0) graphs.emplace(gk, build_graph(y, p.variant, hyper_for(p)));
    }

    // Rewrite the surviving rows so a truncated line from an interrupted run
    // does not linger, then append.
    {
      std::string text = header + "\n";
      for (const auto& r : done) text += detail::sweep_line(r) + "\n";
      detail::write_atomically(out_path, text);
    }
    std::ofstream append(out_path, std::ios::app);
    if (!append) throw DataError("cannot append to '" + out_path.string() + "'");

    std::mutex mu;
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    const auto work = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= pending.size()) return;
        {
          std::lock_guard lock(mu);
          if (failure) return;
        }
        try {
          const SweepPoint& p = pending[i];
          TrainConfig cfg = config.train;
          cfg.variant = p.variant;
          cfg.bits = p.bits;
          cfg.hyper = hyper_for(p);
          cfg.log_path.clear();
          const UchModel model = train_on_graph(
              split.train, graphs.at({p.variant, p.graph_size}), cfg);
          SweepRow row;
          row.key = p.key();
          for (const Task t : tasks)
            row.maps.push_back(
                evaluate_task(model, split, t, config.r_cutoff, config.database).map);
          row.average = mean_of(row.maps);
          row.iterations = static_cast<int>(model.objective_trace.size());
          std::lock_guard lock(mu);
          append << detail::sweep_line(row) << '\n' << std::flush;
          log_info("sweep: " + row.key + " -> " + format_number(row.average));
          done.push_back(std::move(row));
          ++outcome.trained;
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
          return;
        }
      }
    };
    {
      std::vector<std::jthread> pool;
      const auto n = std::min<std::size_t>(workers, pending.size());
      for (std::size_t w = 1; w < n; ++w) pool.emplace_back(work);
      work();
    }
    append.close();
    if (failure) std::rethrow_exception(failure);
  }

  std::stable_sort(done.begin(), done.end(), [](const SweepRow& a, const SweepRow& b) {
    if (a.average != b.average) return a.average > b.average;
    return a.key < b.key;
  });
  std::string text = header + "\n";
  for (const auto& r : done) text += detail::sweep_line(r) + "\n";
  detail::write_atomically(out_path, text);
  outcome.rows = std::move(done);
  return outcome;
}

inline SweepOutcome cmd_sweep(const std::filesystem::path& config_path,
                              std::optional<unsigned> workers_override = std::nullopt) {
  return cmd_sweep(load_run_config(config_path), workers_override);
}

}  // namespace uch
