// Copyright 2026 The latepage Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "latepage/core.h"

namespace latepage {

// Accumulation order is fixed everywhere in this module: a dot product adds
// coordinate products in ascending coordinate order into a 32-bit accumulator
// starting at zero, and MaxSim adds per-row maxima in ascending query-row
// order. The blocked kernels below vectorize across vectors, never within one
// dot product, so they are bitwise equal to dot_reference.

/// Plain sequential dot product; the reference the fast kernels must match.
float
dot_reference(std::span<const float> a, std::span<const float> b);

/// out[j] = query . column j of a d x count column-major block whose
/// consecutive coordinates are `stride` floats apart.
void
dot_columns(std::span<const float> query, const float* block, std::size_t count, std::size_t stride,
            float* out);

/// Writes the d x n column-major transpose of a row-major n x d view.
void
transpose_into(EmbeddingView rows, std::vector<float>& out);

/// Dense n^q x n^v dot-product matrix.
struct ScoreMatrix {
    std::size_t query_tokens = 0;
    std::size_t page_tokens = 0;
    std::vector<float> values;

    float
    at(std::size_t i, std::size_t j) const {
        return values[i * page_tokens + j];
    }
};

ScoreMatrix
score_matrix(EmbeddingView query, EmbeddingView page);

/// Reusable MaxSim evaluator; keeps the transpose buffer between calls.
/// Not thread-safe; use one per thread.
class MaxSimScorer {
public:
    float
    score(EmbeddingView query, EmbeddingView page);

private:
    std::vector<float> page_t_;
    std::vector<float> dots_;
};

/// Sum over query rows of the best dot product against any page row.
/// Throws kDimensionMismatch naming both dims.
float
maxsim_score(EmbeddingView query, EmbeddingView page);
float
maxsim_score(const MultiVecEmbedding& query, const MultiVecEmbedding& page);

/// maxsim_score for every page, in input order. A dim mismatch anywhere
/// rejects the whole batch before any scoring.
std::vector<float>
score_pages(EmbeddingView query, std::span<const EmbeddingView> pages);

/// Ranking order: higher score first, ties by ascending global id.
inline bool
ranks_before(const Hit& a, const Hit& b) {
    if (a.score != b.score) {
        return a.score > b.score;
    }
    return a.page.global_id < b.page.global_id;
}

/// First min(k, |scores|) entries of the full ranking. k = 0 is an error.
std::vector<Hit>
top_k(std::vector<Hit> scores, std::size_t k);

}  // namespace latepage
