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

#include <cstdint>
#include <optional>

#include "uch/core.hpp"
#include "uch/dataio.hpp"
#include "uch/random.hpp"
#include "uch/retrieval.hpp"

namespace uch {

/// Sanity baseline: one seeded Gaussian projection R of the concatenated
/// features. Database codes are sgn(Y_train R); a single-modality query
/// fills the other modality's block with zeros, i.e. sgn(x R_v).
inline RetrievalReport random_projection_baseline(
    const LabeledSplit& split, int bits, std::uint64_t seed, Task task,
    std::optional<Index> r_cutoff = std::nullopt) {
  const ConcatenatedFeatures y = concatenate(split.train);
  Rng rng(derive_seed(seed, "baseline"));
  const Matrix r = standard_normal(y.cols(), bits, rng);
  const CodeMatrix db = sign_quantize(y.data * r);

  const auto qm = static_cast<std::size_t>(query_modality(task) - 1);
  Index offset = 0;
  for (std::size_t v = 0; v < qm; ++v) offset += split.train[v].cols();
  const Matrix& q = split.query[qm].data;
  const CodeMatrix queries = sign_quantize(q * r.middleRows(offset, q.cols()));
  return evaluate_codes(queries, split.query_labels, db, split.train_labels, task,
                        r_cutoff);
}

}  // namespace uch
