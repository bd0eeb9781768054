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

#include "latepage/scoring.h"

#include <algorithm>
#include <string>

#include "latepage/error.h"

namespace latepage {

namespace {

void
check_dims(std::size_t query_dim, std::size_t page_dim) {
    if (query_dim != page_dim) {
        throw Error(ErrorKind::kDimensionMismatch, "query dim " + std::to_string(query_dim) +
                                                       " does not match page dim " +
                                                       std::to_string(page_dim));
    }
}

}  // namespace

float
dot_reference(std::span<const float> a, std::span<const float> b) {
    float acc = 0.0F;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t c = 0; c < n; ++c) {
        acc += a[c] * b[c];
    }
    return acc;
}

void
dot_columns(std::span<const float> query, const float* __restrict block, std::size_t count,
            std::size_t stride, float* __restrict out) {
    std::fill(out, out + count, 0.0F);
    const float* q = query.data();
    for (std::size_t c = 0; c < query.size(); ++c) {
        const float qc = q[c];
        const float* col = block + c * stride;
        for (std::size_t j = 0; j < count; ++j) {
            out[j] += qc * col[j];
        }
    }
}

void
transpose_into(EmbeddingView rows, std::vector<float>& out) {
    const std::size_t n = rows.rows();
    const std::size_t d = rows.dim();
    out.resize(n * d);
    const float* src = rows.data();
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t c = 0; c < d; ++c) {
            out[c * n + j] = src[j * d + c];
        }
    }
}

ScoreMatrix
score_matrix(EmbeddingView query, EmbeddingView page) {
    check_dims(query.dim(), page.dim());
    ScoreMatrix m;
    m.query_tokens = query.rows();
    m.page_tokens = page.rows();
    m.values.resize(m.query_tokens * m.page_tokens);
    std::vector<float> page_t;
    transpose_into(page, page_t);
    for (std::size_t i = 0; i < query.rows(); ++i) {
        dot_columns(query.row(i), page_t.data(), page.rows(), page.rows(),
                    m.values.data() + i * m.page_tokens);
    }
    return m;
}

float
MaxSimScorer::score(EmbeddingView query, EmbeddingView page) {
    check_dims(query.dim(), page.dim());
    const std::size_t nv = page.rows();
    transpose_into(page, page_t_);
    dots_.resize(nv);
    float total = 0.0F;
    for (std::size_t i = 0; i < query.rows(); ++i) {
        dot_columns(query.row(i), page_t_.data(), nv, nv, dots_.data());
        total += *std::max_element(dots_.begin(), dots_.end());
    }
    return total;
}

float
maxsim_score(EmbeddingView query, EmbeddingView page) {
    MaxSimScorer scorer;
    return scorer.score(query, page);
}

float
maxsim_score(const MultiVecEmbedding& query, const MultiVecEmbedding& page) {
    return maxsim_score(query.view(), page.view());
}

std::vector<float>
score_pages(EmbeddingView query, std::span<const EmbeddingView> pages) {
    for (const auto& p : pages) {
        check_dims(query.dim(), p.dim());
    }
    std::vector<float> out;
    out.reserve(pages.size());
    MaxSimScorer scorer;
    for (const auto& p : pages) {
        out.push_back(scorer.score(query, p));
    }
    return out;
}

std::vector<Hit>
top_k(std::vector<Hit> scores, std::size_t k) {
    if (k == 0) {
        throw Error(ErrorKind::kInvalidArgument, "top_k requires k >= 1");
    }
    const std::size_t keep = std::min(k, scores.size());
    std::partial_sort(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(keep), scores.end(),
                      ranks_before);
    scores.resize(keep);
    return scores;
}

}  // namespace latepage
