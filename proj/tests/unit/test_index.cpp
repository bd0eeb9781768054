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

#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include "latepage/error.h"
#include "latepage/index.h"
#include "latepage/scoring.h"
#include "latepage/synth.h"
#include "support.h"

using namespace latepage;
using latepage::testing::oracle_rank;

namespace {

ErrorKind
kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected latepage::Error");
    return ErrorKind::kIo;
}

IndexConfig
ivf(IndexKind kind, std::uint32_t nlist, std::uint32_t nprobe, std::uint32_t candidates = 0) {
    IndexConfig c;
    c.kind = kind;
    c.nlist = nlist;
    c.nprobe = nprobe;
    c.candidate_pages = candidates;
    c.kmeans.iters = 10;
    return c;
}

void
check_same(const std::vector<Hit>& a, const std::vector<Hit>& b) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].page == b[i].page);
        CHECK(a[i].score == b[i].score);
    }
}

}  // namespace

TEST_CASE("flat index stores every token vector") {
    const auto c = make_gaussian_corpus(3, 2, 4, 1, 10);
    const auto idx = PageIndex::build(c.manifest, c.store, {});
    CHECK(idx.store().token_count() == 6);
    CHECK(idx.nlist() == 0);
}

TEST_CASE("inverted lists partition tokens by max inner product centroid") {
    const auto c = make_gaussian_corpus(3, 2, 4, 2, 10);
    const auto idx = PageIndex::build(c.manifest, c.store, ivf(IndexKind::kIvfFlat, 4, 1));
    REQUIRE(idx.nlist() == 4);
    std::size_t total = 0;
    std::vector<int> seen(6, 0);
    for (std::size_t l = 0; l < idx.nlist(); ++l) {
        const auto& list = idx.lists()[l];
        total += list.size();
        for (std::size_t j = 0; j < list.size(); ++j) {
            const std::uint32_t v = list.vector_ids[j];
            ++seen[v];
            CHECK(list.page_ids[j] == v / 2);
            const auto t = c.store->token(v);
            std::size_t best = 0;
            float best_dot = -INFINITY;
            for (std::size_t k = 0; k < 4; ++k) {
                const float d = dot_reference(t, std::span<const float>(idx.centroids().data() + k * 4, 4));
                if (d > best_dot) {
                    best_dot = d;
                    best = k;
                }
            }
            CHECK(best == l);
        }
    }
    CHECK(total == 6);
    CHECK(seen == std::vector<int>(6, 1));
}

TEST_CASE("PQ codes are m bytes per token vector") {
    const auto c = make_gaussian_corpus(40, 8, 16, 3, 10);
    IndexConfig cfg = ivf(IndexKind::kIvfPq, 4, 2);
    cfg.m = 4;
    cfg.nbits = 8;
    const auto idx = PageIndex::build(c.manifest, c.store, cfg);
    std::size_t codes = 0;
    for (const auto& list : idx.lists()) {
        CHECK(list.codes_t.size() == list.size() * 4);
        codes += list.codes_t.size();
    }
    CHECK(codes == 320 * 4);
    CHECK(idx.code(0, 0).size() == 4);
}

TEST_CASE("defaults follow the corpus size") {
    IndexConfig c;
    c.kind = IndexKind::kIvfPq;
    const auto r = resolve_defaults(c, 3200, 64);
    CHECK(r.nlist == 57);
    CHECK(r.nprobe == 4);
    CHECK(r.m == 16);
    CHECK(r.nbits == 8);
    CHECK(resolve_defaults(c, 1000000, 128).nlist == 1000);
    CHECK(resolve_defaults(c, 1000000, 128).nprobe == 63);
    CHECK(resolve_defaults(c, 1000000, 128).m == 32);
    CHECK(resolve_defaults(c, 100, 18).m == 3);
    CHECK(default_candidate_pages(4) == 100);
    CHECK(default_candidate_pages(25) == 250);
}

TEST_CASE("config validation") {
    const auto c = make_gaussian_corpus(10, 4, 8, 4, 5);
    CHECK(kind_of([&] { PageIndex::build(c.manifest, c.store, ivf(IndexKind::kIvfFlat, 8, 9)); }) ==
          ErrorKind::kConfig);
    CHECK(kind_of([&] { PageIndex::build(c.manifest, c.store, ivf(IndexKind::kIvfFlat, 41, 1)); }) ==
          ErrorKind::kConfig);
    IndexConfig pq = ivf(IndexKind::kIvfPq, 2, 1);
    pq.m = 3;
    CHECK(kind_of([&] { PageIndex::build(c.manifest, c.store, pq); }) == ErrorKind::kConfig);
    pq.m = 2;
    pq.nbits = 0;
    CHECK(kind_of([&] { PageIndex::build(c.manifest, c.store, pq); }) == ErrorKind::kConfig);
    pq.nbits = 8;  // 256 centroids per subspace from 40 tokens
    CHECK(kind_of([&] { PageIndex::build(c.manifest, c.store, pq); }) == ErrorKind::kConfig);
}

TEST_CASE("flat search matches the oracle") {
    const auto c = make_gaussian_corpus(60, 6, 8, 5, 7);
    const auto idx = PageIndex::build(c.manifest, c.store, {});
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto q = random_gaussian_embedding(3, 8, 100 + s);
        const auto hits = idx.search(q.view(), 10, OpenDomain{});
        const auto want = oracle_rank(q.view(), *c.store, 0, 60, 10);
        REQUIRE(hits.size() == want.size());
        for (std::size_t i = 0; i < hits.size(); ++i) {
            CHECK(hits[i].page.global_id == want[i].first);
            CHECK(hits[i].score == want[i].second);
        }
    }
}

TEST_CASE("closed domain restricts to one document") {
    const auto c = make_gaussian_corpus(23, 4, 8, 6, 5);  // last doc d0004 has 3 pages
    for (IndexKind kind : {IndexKind::kFlat, IndexKind::kIvfFlat, IndexKind::kIvfPq}) {
        IndexConfig cfg = ivf(kind, 4, 2);
        cfg.m = 2;
        cfg.nbits = 4;
        const auto idx = PageIndex::build(c.manifest, c.store, cfg);
        const auto q = random_gaussian_embedding(4, 8, 9);
        const auto hits = idx.search(q.view(), 20, ClosedDomain{DocumentId("d0001")});
        CHECK(hits.size() <= 5);
        for (const auto& h : hits) {
            CHECK(h.page.doc.str() == "d0001");
        }
        CHECK(idx.search(q.view(), 20, ClosedDomain{DocumentId("d0004")}).size() <= 3);
        CHECK(kind_of([&] { idx.search(q.view(), 2, ClosedDomain{DocumentId("nope")}); }) ==
              ErrorKind::kNotFound);
    }
}

TEST_CASE("k at least N returns every page sorted") {
    const auto c = make_gaussian_corpus(12, 3, 5, 7, 4);
    const auto idx = PageIndex::build(c.manifest, c.store, {});
    const auto q = random_gaussian_embedding(2, 5, 1);
    const auto hits = idx.search(q.view(), 50, OpenDomain{});
    REQUIRE(hits.size() == 12);
    for (std::size_t i = 1; i < hits.size(); ++i) {
        CHECK(ranks_before(hits[i - 1], hits[i]));
    }
}

TEST_CASE("a page duplicating the query ranks first with the squared norms") {
    const std::uint32_t dim = 16;
    const std::uint32_t tpp = 4;
    std::mt19937_64 rng(8);
    std::normal_distribution<float> normal(0.0F, 1.0F);
    std::vector<float> data(30 * tpp * dim);
    for (std::size_t i = 0; i < data.size(); i += dim) {
        float n2 = 0.0F;
        for (std::size_t c = 0; c < dim; ++c) {
            data[i + c] = normal(rng);
            n2 += data[i + c] * data[i + c];
        }
        for (std::size_t c = 0; c < dim; ++c) {
            data[i + c] /= std::sqrt(n2);
        }
    }
    auto manifest = std::make_shared<const CorpusManifest>(make_synthetic_manifest(30, 10, dim, tpp));
    auto store = std::make_shared<const EmbeddingStore>(dim, tpp, 30, "unit", data);
    const auto page = store->page(17);
    const MultiVecEmbedding q(tpp, dim, std::vector<float>(page.values().begin(), page.values().end()));
    float want = 0.0F;
    for (std::size_t i = 0; i < tpp; ++i) {
        want += dot_reference(q.row(i), q.row(i));
    }
    for (IndexKind kind : {IndexKind::kFlat, IndexKind::kIvfFlat}) {
        const auto idx = PageIndex::build(manifest, store, ivf(kind, 5, 1));
        const auto hits = idx.search(q.view(), 1, OpenDomain{});
        REQUIRE(hits.size() == 1);
        CHECK(hits[0].page.global_id == 17);
        CHECK(hits[0].score == want);
        CHECK(hits[0].score == doctest::Approx(4.0).epsilon(1e-5));
    }
}

TEST_CASE("exhaustive probing reproduces flat") {
    const auto c = make_gaussian_corpus(80, 8, 16, 9, 10);
    const auto flat = PageIndex::build(c.manifest, c.store, {});
    IndexConfig pq = ivf(IndexKind::kIvfPq, 12, 12, 80);
    pq.m = 4;
    pq.nbits = 6;
    for (const IndexConfig& cfg : {ivf(IndexKind::kIvfFlat, 12, 12, 80), pq}) {
        const auto idx = PageIndex::build(c.manifest, c.store, cfg);
        for (std::uint64_t s = 0; s < 10; ++s) {
            const auto q = random_gaussian_embedding(5, 16, 500 + s);
            check_same(idx.search(q.view(), 10, OpenDomain{}), flat.search(q.view(), 10, OpenDomain{}));
            check_same(idx.search(q.view(), 3, ClosedDomain{DocumentId("d0002")}),
                       flat.search(q.view(), 3, ClosedDomain{DocumentId("d0002")}));
        }
    }
}

TEST_CASE("search parameter overrides") {
    const auto c = make_gaussian_corpus(80, 8, 16, 10, 10);
    const auto flat = PageIndex::build(c.manifest, c.store, {});
    const auto idx = PageIndex::build(c.manifest, c.store, ivf(IndexKind::kIvfFlat, 12, 1));
    const auto q = random_gaussian_embedding(5, 16, 3);
    SearchParams all;
    all.nprobe = 12;
    all.candidate_pages = 80;
    check_same(idx.search(q.view(), 10, OpenDomain{}, all), flat.search(q.view(), 10, OpenDomain{}));

    SearchParams small;
    small.candidate_pages = 5;
    CHECK(kind_of([&] { idx.search(q.view(), 10, OpenDomain{}, small); }) == ErrorKind::kConfig);
    SearchParams whole;
    whole.nprobe = 12;
    whole.candidate_pages = 80;
    check_same(idx.search(q.view(), 90, OpenDomain{}, whole), flat.search(q.view(), 90, OpenDomain{}));
    SearchParams wide;
    wide.nprobe = 13;
    CHECK(kind_of([&] { idx.search(q.view(), 10, OpenDomain{}, wide); }) == ErrorKind::kConfig);
}

TEST_CASE("candidate scores sum each row's best hit") {
    const auto c = make_gaussian_corpus(20, 4, 8, 11, 10);
    const auto idx = PageIndex::build(c.manifest, c.store, ivf(IndexKind::kIvfFlat, 6, 6));
    const auto q = random_gaussian_embedding(3, 8, 4);
    // With every list probed the candidate score is the exact MaxSim.
    const auto cands = idx.candidates(q.view(), OpenDomain{}, 6, 20);
    REQUIRE(cands.size() == 20);
    for (const auto& h : cands) {
        CHECK(h.score == maxsim_score(q.view(), c.store->page(h.page.global_id)));
    }
    CHECK_THROWS_AS(PageIndex::build(c.manifest, c.store, {}).candidates(q.view(), OpenDomain{}, 1, 5), Error);
}

TEST_CASE("search errors") {
    const auto c = make_gaussian_corpus(10, 4, 8, 12, 5);
    const auto idx = PageIndex::build(c.manifest, c.store, ivf(IndexKind::kIvfFlat, 4, 2));
    const auto q = random_gaussian_embedding(2, 8, 1);
    CHECK(kind_of([&] { idx.search(q.view(), 0, OpenDomain{}); }) == ErrorKind::kInvalidArgument);
    const auto wrong = random_gaussian_embedding(2, 7, 1);
    CHECK(kind_of([&] { idx.search(wrong.view(), 3, OpenDomain{}); }) == ErrorKind::kDimensionMismatch);

    const Query query{"q7", "text", q, OpenDomain{}};
    const auto r = idx.search(query, 3);
    CHECK(r.query_id == "q7");
    CHECK(r.hits.size() == 3);
}

TEST_CASE("concurrent searches agree") {
    const auto c = make_gaussian_corpus(200, 8, 16, 13, 10);
    const auto idx = PageIndex::build(c.manifest, c.store, ivf(IndexKind::kIvfFlat, 16, 4));
    std::vector<MultiVecEmbedding> qs;
    for (std::uint64_t s = 0; s < 8; ++s) {
        qs.push_back(random_gaussian_embedding(4, 16, s));
    }
    std::vector<std::vector<Hit>> serial;
    for (const auto& q : qs) {
        serial.push_back(idx.search(q.view(), 5, OpenDomain{}));
    }
    std::vector<std::vector<Hit>> parallel(qs.size());
    {
        std::vector<std::jthread> threads;
        for (std::size_t i = 0; i < qs.size(); ++i) {
            threads.emplace_back([&, i] { parallel[i] = idx.search(qs[i].view(), 5, OpenDomain{}); });
        }
    }
    for (std::size_t i = 0; i < qs.size(); ++i) {
        check_same(parallel[i], serial[i]);
    }
}

TEST_CASE("index kind names") {
    CHECK(parse_index_kind("flat") == IndexKind::kFlat);
    CHECK(parse_index_kind("ivfflat") == IndexKind::kIvfFlat);
    CHECK(parse_index_kind("ivfpq") == IndexKind::kIvfPq);
    CHECK(index_kind_name(IndexKind::kIvfPq) == "ivfpq");
    CHECK_THROWS_AS(parse_index_kind("hnsw"), Error);
}
