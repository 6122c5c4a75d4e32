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

#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "oracles.hpp"
#include "uch/baseline.hpp"
#include "uch/retrieval.hpp"

namespace uch {
namespace {

std::vector<std::uint8_t> random_relevance(std::mt19937_64& rng, std::size_t n, double p) {
  std::bernoulli_distribution coin(p);
  std::vector<std::uint8_t> rel(n);
  for (auto& r : rel) r = coin(rng) ? 1 : 0;
  return rel;
}

TEST(HammingRank, IdentityAndComplement) {
  std::mt19937_64 rng(91);
  const Matrix code = oracle::random_signs(rng, 1, 16);
  Matrix db(2, 16);
  db.row(0) = -code;
  db.row(1) = code;
  const auto ranks = hamming_rank(sign_quantize(code), sign_quantize(db));
  EXPECT_EQ(ranks[0], (std::vector<Index>{1, 0}));
  const PackedCodes q(sign_quantize(code)), d(sign_quantize(db));
  EXPECT_EQ(hamming_distances(q, 0, d), (std::vector<int>{16, 0}));
}

TEST(HammingRank, MatchesNaiveOracleAndIsAPermutation) {
  std::mt19937_64 rng(92);
  for (const int r : {32, 7, 65}) {
    const Matrix q = oracle::random_signs(rng, 20, r);
    // Few distinct codes force plenty of ties.
    Matrix db(50, r);
    const Matrix pool = oracle::random_signs(rng, 6, r);
    for (Index i = 0; i < 50; ++i) db.row(i) = pool.row(static_cast<Index>(rng() % 6));
    const auto got = hamming_rank(sign_quantize(q), sign_quantize(db));
    const auto expected = oracle::naive_hamming_rank(q, db);
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i], std::vector<Index>(expected[i].begin(), expected[i].end()));
      std::vector<Index> sorted = got[i];
      std::sort(sorted.begin(), sorted.end());
      for (Index j = 0; j < 50; ++j) EXPECT_EQ(sorted[static_cast<std::size_t>(j)], j);
    }
  }
}

TEST(HammingRank, BitMismatchThrows) {
  EXPECT_THROW(hamming_rank(CodeMatrix::filled(1, 8, 1), CodeMatrix::filled(2, 9, 1)),
               DataError);
}

TEST(AveragePrecision, Examples) {
  const std::vector<std::uint8_t> all{1, 1, 1}, mixed{1, 0, 1}, none{0, 0, 0};
  EXPECT_EQ(average_precision(all, 3), 1.0);
  EXPECT_NEAR(average_precision(mixed, 3), 0.5 * (1.0 + 2.0 / 3.0), 1e-15);
  EXPECT_EQ(average_precision(none, 3), 0.0);
  EXPECT_THROW(average_precision(all, 0), UsageError);
  EXPECT_THROW(average_precision(all, 4), UsageError);
}

TEST(AveragePrecision, MatchesDefinitionOracle) {
  std::mt19937_64 rng(93);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 200;
    const auto rel = random_relevance(rng, n, 0.05 + 0.9 * (trial % 10) / 10.0);
    const long r = 1 + static_cast<long>(rng() % n);
    EXPECT_NEAR(average_precision(rel, r), oracle::average_precision_definition(rel, r), 1e-12);
  }
}

TEST(AveragePrecision, IrrelevantTailAndUpwardSwaps) {
  std::mt19937_64 rng(94);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng() % 60;
    auto rel = random_relevance(rng, n, 0.4);
    const double ap = average_precision(rel, static_cast<Index>(n));
    auto extended = rel;
    extended.resize(n + 1 + rng() % 20, 0);
    EXPECT_EQ(average_precision(extended, static_cast<Index>(extended.size())), ap);
    // Move one relevant item one rank up past an irrelevant one.
    for (std::size_t k = 1; k < n; ++k)
      if (rel[k] == 1 && rel[k - 1] == 0) {
        std::swap(rel[k], rel[k - 1]);
        EXPECT_GE(average_precision(rel, static_cast<Index>(n)), ap);
        break;
      }
  }
}

TEST(EvaluateCodes, HandBuiltExampleMatchesOracle) {
  std::mt19937_64 rng(95);
  const Matrix db = oracle::random_signs(rng, 30, 12);
  const Matrix q = oracle::random_signs(rng, 10, 12);
  std::vector<int> dbl(30), ql(10);
  for (int i = 0; i < 30; ++i) dbl[static_cast<std::size_t>(i)] = i % 3;
  for (int i = 0; i < 10; ++i) ql[static_cast<std::size_t>(i)] = i % 4;  // class 3 absent
  const RetrievalReport rep =
      evaluate_codes(sign_quantize(q), ql, sign_quantize(db), dbl, Task::kI2T);
  const auto ranks = oracle::naive_hamming_rank(q, db);
  double sum = 0.0;
  for (int i = 0; i < 10; ++i) {
    std::vector<std::uint8_t> rel;
    for (const auto j : ranks[static_cast<std::size_t>(i)])
      rel.push_back(dbl[static_cast<std::size_t>(j)] == ql[static_cast<std::size_t>(i)]);
    const double ap = oracle::average_precision_definition(rel, 30);
    EXPECT_NEAR(rep.ap_per_query[static_cast<std::size_t>(i)], ap, 1e-12);
    if (i % 4 == 3) {
      EXPECT_EQ(ap, 0.0);
    }
    sum += ap;
  }
  EXPECT_NEAR(rep.map, sum / 10.0, 1e-12);
  EXPECT_NEAR(rep.map, mean_of(rep.ap_per_query), 1e-12);
  EXPECT_EQ(rep.r_cutoff, 30);
  EXPECT_EQ(rep.code_length, 12);
}

TEST(EvaluateCodes, IdenticalLabelsGiveMapOne) {
  std::mt19937_64 rng(96);
  const Matrix db = oracle::random_signs(rng, 25, 8);
  const Matrix q = oracle::random_signs(rng, 5, 8);
  const RetrievalReport rep = evaluate_codes(sign_quantize(q), std::vector<int>(5, 2),
                                             sign_quantize(db), std::vector<int>(25, 2),
                                             Task::kT2I, 10);
  EXPECT_EQ(rep.map, 1.0);
  EXPECT_EQ(rep.r_cutoff, 10);
}

TEST(EvaluateCodes, ErrorPaths) {
  const CodeMatrix db = CodeMatrix::filled(4, 8, 1);
  const std::vector<int> dbl(4, 0);
  EXPECT_THROW(evaluate_codes(CodeMatrix::filled(0, 8, 1), {}, db, dbl, Task::kI2T), DataError);
  EXPECT_THROW(evaluate_codes(CodeMatrix::filled(1, 8, 1), std::vector<int>{0}, db, dbl,
                              Task::kI2T, 5),
               UsageError);
  EXPECT_THROW(
      evaluate_codes(CodeMatrix::filled(1, 8, 1), std::vector<int>{0, 1}, db, dbl, Task::kI2T),
      DataError);
}

TEST(Tasks, ParseAndModalities) {
  EXPECT_EQ(parse_task("i2t"), Task::kI2T);
  EXPECT_EQ(parse_task("T2I"), Task::kT2I);
  EXPECT_THROW(parse_task("x2y"), UsageError);
  EXPECT_EQ(query_modality(Task::kI2T), 1);
  EXPECT_EQ(database_modality(Task::kI2T), 2);
}

TEST(Reports, CsvLayout) {
  RetrievalReport a{Task::kI2T, 0.5, {0.25, 0.75}, 2, 64};
  RetrievalReport b{Task::kT2I, 1.0, {1.0}, 2, 64};
  const std::vector<RetrievalReport> reps{a, b};
  std::ostringstream os;
  write_report_csv(reps, os);
  EXPECT_EQ(os.str(), "task,bits,map\ni2t,64,0.5\nt2i,64,1\n");
  std::ostringstream ap;
  write_ap_csv(reps, ap);
  EXPECT_EQ(ap.str(), "task,query,ap\ni2t,0,0.25\ni2t,1,0.75\nt2i,0,1\n");
}

LabeledSplit toy_split() {
  const auto tv = oracle::clustered_views(97, 120, 6, 5, 3);
  LabeledSplit s;
  s.train = {{tv.x1.topRows(90), 1, Vector::Zero(6)}, {tv.x2.topRows(90), 2, Vector::Zero(5)}};
  s.query = {{tv.x1.bottomRows(30), 1, Vector::Zero(6)},
             {tv.x2.bottomRows(30), 2, Vector::Zero(5)}};
  s.train_labels.assign(tv.labels.begin(), tv.labels.begin() + 90);
  s.query_labels.assign(tv.labels.begin() + 90, tv.labels.end());
  return s;
}

TEST(Baseline, DeterministicAndInRange) {
  const LabeledSplit s = toy_split();
  for (const Task t : {Task::kI2T, Task::kT2I}) {
    const RetrievalReport a = random_projection_baseline(s, 16, 3, t);
    const RetrievalReport b = random_projection_baseline(s, 16, 3, t);
    EXPECT_EQ(a.map, b.map);
    EXPECT_GE(a.map, 0.0);
    EXPECT_LE(a.map, 1.0);
    EXPECT_EQ(a.code_length, 16);
  }
}

TEST(EvaluateTask, ChecksModelAgainstSplit) {
  const LabeledSplit s = toy_split();
  UchModel m;
  m.projections = {Matrix::Ones(6, 4), Matrix::Ones(4, 4)};
  m.means = {Vector::Zero(6), Vector::Zero(4)};
  m.alphas = Vector::Constant(2, 0.5);
  m.training_codes = CodeMatrix::filled(90, 4, 1);
  EXPECT_THROW(evaluate_task(m, s, Task::kI2T), DataError);
  m.projections[1] = Matrix::Ones(5, 4);
  m.means[1] = Vector::Zero(5);
  EXPECT_NO_THROW(evaluate_task(m, s, Task::kI2T));
  m.training_codes = CodeMatrix::filled(80, 4, 1);
  EXPECT_THROW(evaluate_task(m, s, Task::kI2T), DataError);
}

}  // namespace
}  // namespace uch
