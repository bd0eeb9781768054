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


#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "latepage/error.h"
#include "latepage/scoring.h"
#include "latepage/synth.h"
#include "support.h"

using namespace latepage;
using latepage::testing::oracle_maxsim;

namespace {

MultiVecEmbedding
random_embedding(std::mt19937_64& rng, std::size_t rows, std::size_t dim) {
    std::normal_distribution<float> normal(0.0F, 1.0F);
    std::vector<float> v(rows * dim);
    for (auto& x : v) {
        x = normal(rng);
    }
    return {rows, dim, std::move(v)};
}

Hit
hit(std::uint32_t g, float score) {
    return {PageRef{DocumentId("d"), g, g}, score};
}

bool
close_rel(float a, float b, float rel = 1e-5F) {
    return std::fabs(a - b) <= rel * std::max({1.0F, std::fabs(a), std::fabs(b)});
}

}  // namespace

TEST_CASE("maxsim worked examples") {
    const auto e = MultiVecEmbedding::from_rows({{1, 0}});
    CHECK(maxsim_score(e, e) == 1.0F);

    const auto q2 = MultiVecEmbedding::from_rows({{1, 0}, {0, 1}});
    CHECK(maxsim_score(q2, e) == 1.0F);

    const auto q = MultiVecEmbedding::from_rows({{2, 1}, {0, 3}});
    const auto p = MultiVecEmbedding::from_rows({{1, 1}, {-1, 2}});
    CHECK(maxsim_score(q, p) == 9.0F);

    const auto m = score_matrix(q.view(), p.view());
    CHECK(m.at(0, 0) == 3.0F);
    CHECK(m.at(0, 1) == 0.0F);
    CHECK(m.at(1, 0) == 3.0F);
    CHECK(m.at(1, 1) == 6.0F);
}

TEST_CASE("all-negative dots keep the negative maximum") {
    const auto q = MultiVecEmbedding::from_rows({{1, 0}});
    const auto p = MultiVecEmbedding::from_rows({{-3, 0}, {-2, 0}});
    CHECK(maxsim_score(q, p) == -2.0F);
}

TEST_CASE("dimension mismatch names both dims") {
    const auto q = MultiVecEmbedding::from_rows({{1, 0, 0}});
    const auto p = MultiVecEmbedding::from_rows({{1, 0}});
    try {
        maxsim_score(q, p);
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::kDimensionMismatch);
        const std::string msg = e.what();
        CHECK(msg.find('3') != std::string::npos);
        CHECK(msg.find('2') != std::string::npos);
    }
    std::vector<EmbeddingView> pages{q.view(), p.view()};
    CHECK_THROWS_AS(score_pages(q.view(), pages), Error);
}

TEST_CASE("blocked kernel is bitwise equal to the reference dot") {
    std::mt19937_64 rng(3);
    for (std::size_t dim : {1, 3, 8, 17, 64, 128}) {
        for (std::size_t n : {1, 2, 7, 16, 33, 100}) {
            const auto q = random_embedding(rng, 1, dim);
            const auto rows = random_embedding(rng, n, dim);
            std::vector<float> t;
            transpose_into(rows.view(), t);
            std::vector<float> out(n);
            dot_columns(q.row(0), t.data(), n, n, out.data());
            for (std::size_t j = 0; j < n; ++j) {
                CHECK(out[j] == dot_reference(q.row(0), rows.row(j)));
            }
        }
    }
}

TEST_CASE("library maxsim equals the independent oracle bitwise") {
    std::mt19937_64 rng(5);
    MaxSimScorer scorer;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t dim = 1 + rng() % 48;
        const auto q = random_embedding(rng, 1 + rng() % 20, dim);
        const auto p = random_embedding(rng, 1 + rng() % 40, dim);
        const float want = oracle_maxsim(q.view(), p.view());
        CHECK(maxsim_score(q, p) == want);
        CHECK(scorer.score(q.view(), p.view()) == want);
    }
}

TEST_CASE("score_pages equals the per-page loop") {
    std::mt19937_64 rng(7);
    const auto q = random_embedding(rng, 8, 16);
    std::vector<MultiVecEmbedding> pages;
    for (int i = 0; i < 100; ++i) {
        pages.push_back(random_embedding(rng, 12, 16));
    }
    std::vector<EmbeddingView> views;
    for (const auto& p : pages) {
        views.push_back(p.view());
    }
    const auto scores = score_pages(q.view(), views);
    REQUIRE(scores.size() == 100);
    for (std::size_t i = 0; i < pages.size(); ++i) {
        CHECK(scores[i] == maxsim_score(q, pages[i]));
    }

    std::vector<EmbeddingView> twice{views[0], views[0]};
    const auto same = score_pages(q.view(), twice);
    CHECK(same[0] == same[1]);
    CHECK(score_pages(q.view(), {}).empty());
}

TEST_CASE("page row permutation leaves the score bitwise unchanged") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        const auto q = random_embedding(rng, 5, 12);
        const auto p = random_embedding(rng, 9, 12);
        std::vector<std::size_t> perm(9);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<float> shuffled;
        for (std::size_t j : perm) {
            shuffled.insert(shuffled.end(), p.row(j).begin(), p.row(j).end());
        }
        const MultiVecEmbedding p2(9, 12, shuffled);
        CHECK(maxsim_score(q, p) == maxsim_score(q, p2));
    }
}

TEST_CASE("query row permutation changes only the summation order") {
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 100; ++trial) {
        const auto q = random_embedding(rng, 6, 12);
        const auto p = random_embedding(rng, 9, 12);
        std::vector<float> reversed;
        for (std::size_t i = q.rows(); i-- > 0;) {
            reversed.insert(reversed.end(), q.row(i).begin(), q.row(i).end());
        }
        const MultiVecEmbedding q2(6, 12, reversed);
        CHECK(close_rel(maxsim_score(q, p), maxsim_score(q2, p)));
    }
}

TEST_CASE("scaling the query scales the score") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<float> uc(0.1F, 10.0F);
    for (int trial = 0; trial < 100; ++trial) {
        const auto q = random_embedding(rng, 4, 10);
        const auto p = random_embedding(rng, 7, 10);
        const float base = maxsim_score(q, p);
        // Powers of two are exact in binary floating point.
        for (float c : {0.25F, 0.5F, 2.0F, 8.0F}) {
            std::vector<float> v(q.values().begin(), q.values().end());
            for (auto& x : v) {
                x *= c;
            }
            CHECK(maxsim_score(MultiVecEmbedding(4, 10, v), p) == c * base);
        }
        const float c = uc(rng);
        std::vector<float> v(q.values().begin(), q.values().end());
        for (auto& x : v) {
            x *= c;
        }
        CHECK(close_rel(maxsim_score(MultiVecEmbedding(4, 10, v), p), c * base, 1e-4F));
    }
}

TEST_CASE("ranking is invariant under power-of-two query scaling") {
    std::mt19937_64 rng(12);
    const auto q = random_embedding(rng, 4, 8);
    std::vector<float> v(q.values().begin(), q.values().end());
    for (auto& x : v) {
        x *= 4.0F;
    }
    const MultiVecEmbedding q4(4, 8, v);
    std::vector<Hit> a;
    std::vector<Hit> b;
    for (std::uint32_t g = 0; g < 50; ++g) {
        const auto p = random_embedding(rng, 6, 8);
        a.push_back(hit(g, maxsim_score(q, p)));
        b.push_back(hit(g, maxsim_score(q4, p)));
    }
    const auto ta = top_k(a, 10);
    const auto tb = top_k(b, 10);
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(ta[i].page == tb[i].page);
    }
}

TEST_CASE("lowering a page row's dots never raises the score") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        const auto q = random_embedding(rng, 5, 6);
        // Nonnegative query rows: shrinking a nonnegative page row toward zero
        // lowers every dot product pointwise.
        std::vector<float> qv(q.values().begin(), q.values().end());
        for (auto& x : qv) {
            x = std::fabs(x);
        }
        const MultiVecEmbedding qp(5, 6, qv);
        std::vector<float> pv(8 * 6);
        std::uniform_real_distribution<float> u(0.0F, 1.0F);
        for (auto& x : pv) {
            x = u(rng);
        }
        const MultiVecEmbedding p(8, 6, pv);
        const std::size_t row = rng() % 8;
        for (std::size_t c = 0; c < 6; ++c) {
            pv[row * 6 + c] *= 0.5F;
        }
        const MultiVecEmbedding lower(8, 6, pv);
        CHECK(maxsim_score(qp, p) >= maxsim_score(qp, lower));
    }
}

TEST_CASE("top_k tie rule and degenerate k") {
    CHECK_THROWS_AS(top_k({hit(0, 1.0F)}, 0), Error);
    const auto t = top_k({hit(5, 1.0F), hit(2, 1.0F)}, 1);
    REQUIRE(t.size() == 1);
    CHECK(t[0].page.global_id == 2);

    const auto all = top_k({hit(0, 0.5F), hit(1, 2.0F), hit(2, 1.0F)}, 10);
    REQUIRE(all.size() == 3);
    CHECK(all[0].page.global_id == 1);
    CHECK(all[1].page.global_id == 2);
    CHECK(all[2].page.global_id == 0);
    CHECK(top_k({}, 3).empty());
}

TEST_CASE("top_k equals sort-then-take on random scores") {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> coarse(0, 50);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Hit> hits;
        for (std::uint32_t g = 0; g < 1000; ++g) {
            hits.push_back(hit(g, static_cast<float>(coarse(rng)) * 0.25F));  // many ties
        }
        std::shuffle(hits.begin(), hits.end(), rng);
        auto sorted = hits;
        std::sort(sorted.begin(), sorted.end(), [](const Hit& a, const Hit& b) {
            return a.score != b.score ? a.score > b.score : a.page.global_id < b.page.global_id;
        });
        for (std::size_t k : {1, 4, 37, 1000}) {
            const auto t = top_k(hits, k);
            REQUIRE(t.size() == k);
            for (std::size_t i = 0; i < k; ++i) {
                CHECK(t[i] == sorted[i]);
            }
        }
    }
}
