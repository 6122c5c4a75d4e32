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

// Hamming ranking and mean average precision for the image->text (I2T) and
// text->image (T2I) tasks.

#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uch/core.hpp"
#include "uch/dataio.hpp"
#include "uch/encoder.hpp"
#include "uch/parallel.hpp"

namespace uch {

enum class Task { kI2T, kT2I };

inline std::string_view to_string(Task t) { return t == Task::kI2T ? "i2t" : "t2i"; }

inline Task parse_task(std::string_view text) {
  if (text == "i2t" || text == "I2T") return Task::kI2T;
  if (text == "t2i" || text == "T2I") return Task::kT2I;
  throw UsageError("unknown task '" + std::string(text) + "' (expected i2t or t2i)");
}

/// Modality ids of the query side and the database side.
inline int query_modality(Task t) { return t == Task::kI2T ? 1 : 2; }
inline int database_modality(Task t) { return t == Task::kI2T ? 2 : 1; }

/// What the queries are ranked against.
enum class DatabaseMode {
  kTrainingCodes,  // the learned unified codes
  kEncodedTrain,   // training items re-encoded through the target modality
};

struct RetrievalReport {
  Task task = Task::kI2T;
  double map = 0.0;
  std::vector<double> ap_per_query;
  Index r_cutoff = 0;
  int code_length = 0;
};

/// Hamming distances from one query to every database row.
inline std::vector<int> hamming_distances(const PackedCodes& queries, Index q,
                                          const PackedCodes& db) {
  std::vector<int> out(static_cast<std::size_t>(db.rows()));
  const auto qrow = queries.row(q);
  for (Index j = 0; j < db.rows(); ++j)
    out[static_cast<std::size_t>(j)] = PackedCodes::distance(qrow, db.row(j));
  return out;
}

namespace detail {

// Counting sort on distance; stable, so ties keep ascending index order.
inline std::vector<Index> rank_by_distance(const std::vector<int>& dist, int bits) {
  std::vector<Index> start(static_cast<std::size_t>(bits + 2), 0);
  for (const int d : dist) ++start[static_cast<std::size_t>(d + 1)];
  for (std::size_t k = 1; k < start.size(); ++k) start[k] += start[k - 1];
  std::vector<Index> order(dist.size());
  for (std::size_t j = 0; j < dist.size(); ++j)
    order[static_cast<std::size_t>(start[static_cast<std::size_t>(dist[j])]++)] =
        static_cast<Index>(j);
  return order;
}

}  // namespace detail

/// Per query, database indices by ascending Hamming distance, ties by index.
inline std::vector<std::vector<Index>> hamming_rank(const CodeMatrix& queries,
                                                    const CodeMatrix& db) {
  if (queries.bits() != db.bits())
    throw DataError("hamming_rank: query codes have " + std::to_string(queries.bits()) +
                    " bits, database codes " + std::to_string(db.bits()));
  const PackedCodes pq(queries);
  const PackedCodes pd(db);
  std::vector<std::vector<Index>> out(static_cast<std::size_t>(queries.rows()));
  parallel_for(queries.rows(), [&](std::ptrdiff_t q) {
    out[static_cast<std::size_t>(q)] =
        detail::rank_by_distance(hamming_distances(pq, q, pd), db.bits());
  });
  return out;
}

/// AP = (1 / l) sum_{m <= R} P(m) rel(m), where P(m) is the precision of the
/// top m and l the number of relevant items in the top R. Zero when l = 0.
inline double average_precision(std::span<const std::uint8_t> relevance, Index r_cutoff) {
  if (r_cutoff <= 0) throw UsageError("average_precision: R must be > 0");
  if (r_cutoff > static_cast<Index>(relevance.size()))
    throw UsageError("average_precision: R exceeds the ranked list length");
  double sum = 0.0;
  Index hits = 0;
  for (Index m = 0; m < r_cutoff; ++m) {
    if (relevance[static_cast<std::size_t>(m)] == 0) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(m + 1);
  }
  return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

inline double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (const double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

/// MAP of query codes against database codes with label-equality relevance.
/// r_cutoff defaults to the database size.
inline RetrievalReport evaluate_codes(const CodeMatrix& queries,
                                      std::span<const int> query_labels,
                                      const CodeMatrix& db,
                                      std::span<const int> db_labels, Task task,
                                      std::optional<Index> r_cutoff = std::nullopt) {
  if (queries.rows() == 0) throw DataError("evaluate: empty query set");
  if (static_cast<Index>(query_labels.size()) != queries.rows() ||
      static_cast<Index>(db_labels.size()) != db.rows())
    throw DataError("evaluate: label counts do not match code rows");
  const Index cutoff = r_cutoff.value_or(db.rows());
  if (cutoff < 1 || cutoff > db.rows())
    throw UsageError("evaluate: r_cutoff must lie in [1, database size]");
  const auto ranks = hamming_rank(queries, db);
  RetrievalReport report;
  report.task = task;
  report.r_cutoff = cutoff;
  report.code_length = db.bits();
  report.ap_per_query.resize(static_cast<std::size_t>(queries.rows()));
  parallel_for(queries.rows(), [&](std::ptrdiff_t q) {
    const auto& order = ranks[static_cast<std::size_t>(q)];
    std::vector<std::uint8_t> rel(order.size());
    for (std::size_t k = 0; k < order.size(); ++k)
      rel[k] = db_labels[static_cast<std::size_t>(order[k])] ==
                       query_labels[static_cast<std::size_t>(q)]
                   ? 1
                   : 0;
    report.ap_per_query[static_cast<std::size_t>(q)] = average_precision(rel, cutoff);
  });
  report.map = mean_of(report.ap_per_query);
  return report;
}

/// Queries: query-split items of the task's source modality, encoded. The
/// database is the training set (unified codes by default).
inline RetrievalReport evaluate_task(const UchModel& model, const LabeledSplit& split,
                                     Task task, std::optional<Index> r_cutoff = std::nullopt,
                                     DatabaseMode mode = DatabaseMode::kTrainingCodes) {
  const int qm = query_modality(task);
  const int dm = database_modality(task);
  model.check_modality(qm);
  model.check_modality(dm);
  if (split.query_size() == 0) throw DataError("evaluate: empty query set");
  if (split.train.size() != static_cast<std::size_t>(model.modality_count()))
    throw DataError("evaluate: split and model disagree on modality count");
  for (int v = 1; v <= model.modality_count(); ++v)
    if (split.train[static_cast<std::size_t>(v - 1)].cols() != model.dim(v))
      throw DataError("evaluate: modality " + std::to_string(v) + " has " +
                      std::to_string(split.train[static_cast<std::size_t>(v - 1)].cols()) +
                      " features, model expects " + std::to_string(model.dim(v)));
  const CodeMatrix queries = encode(model, split.query[static_cast<std::size_t>(qm - 1)]);
  const CodeMatrix db = mode == DatabaseMode::kTrainingCodes
                            ? model.training_codes
                            : encode(model, split.train[static_cast<std::size_t>(dm - 1)]);
  if (db.rows() != static_cast<Index>(split.train_labels.size()))
    throw DataError("evaluate: model was trained on " + std::to_string(db.rows()) +
                    " samples, split has " + std::to_string(split.train_labels.size()));
  return evaluate_codes(queries, split.query_labels, db, split.train_labels, task, r_cutoff);
}

/// "task,bits,map" rows.
inline void write_report_csv(std::span<const RetrievalReport> reports, std::ostream& os) {
  os.precision(17);
  os << "task,bits,map\n";
  for (const auto& r : reports) os << to_string(r.task) << ',' << r.code_length << ',' << r.map << '\n';
}

/// "task,query,ap" rows.
inline void write_ap_csv(std::span<const RetrievalReport> reports, std::ostream& os) {
  os.precision(17);
  os << "task,query,ap\n";
  for (const auto& r : reports)
    for (std::size_t q = 0; q < r.ap_per_query.size(); ++q)
      os << to_string(r.task) << ',' << q << ',' << r.ap_per_query[q] << '\n';
}

}  // namespace uch
