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

#include <cstring>
#include <fstream>
#include <limits>
#include <random>

#include "latepage/crc64.h"
#include "latepage/error.h"
#include "latepage/index.h"
#include "latepage/storage.h"
#include "latepage/synth.h"
#include "support.h"

using namespace latepage;
using latepage::testing::TempDir;

namespace {

// Bit-at-a-time CRC-64/XZ: reflected polynomial, all-ones init and xorout.
std::uint64_t
crc64_bitwise(std::span<const std::byte> bytes) {
    std::uint64_t crc = ~0ULL;
    for (std::byte b : bytes) {
        crc ^= static_cast<std::uint64_t>(b);
        for (int i = 0; i < 8; ++i) {
            crc = (crc & 1) != 0 ? (crc >> 1) ^ 0xC96C5795D7870F42ULL : crc >> 1;
        }
    }
    return ~crc;
}

std::span<const std::byte>
as_bytes(const std::string& s) {
    return {reinterpret_cast<const std::byte*>(s.data()), s.size()};
}

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

EmbeddingStore
random_store(std::uint32_t pages, std::uint32_t tpp, std::uint32_t dim, std::uint64_t seed,
             const std::string& provider = "mock/1") {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> normal(0.0F, 1.0F);
    std::vector<float> data(static_cast<std::size_t>(pages) * tpp * dim);
    for (auto& x : data) {
        x = normal(rng);
    }
    return {dim, tpp, pages, provider, std::move(data)};
}

void
put_u32(std::vector<std::byte>& b, std::size_t at, std::uint32_t v) {
    std::memcpy(b.data() + at, &v, 4);
}

void
reseal_index(std::vector<std::byte>& b) {
    const std::uint64_t crc = crc64(std::span<const std::byte>(b).subspan(8, b.size() - 16));
    std::memcpy(b.data() + b.size() - 8, &crc, 8);
}

void
check_same_hits(const std::vector<Hit>& a, const std::vector<Hit>& b) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i] == b[i]);
    }
}

}  // namespace

TEST_CASE("crc64 check value and bitwise oracle") {
    CHECK(crc64(as_bytes("123456789")) == 0x995DC9BBDF1939FAULL);
    CHECK(crc64_bitwise(as_bytes("123456789")) == 0x995DC9BBDF1939FAULL);
    CHECK(crc64({}) == 0);
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::byte> buf(rng() % 700);
        for (auto& b : buf) {
            b = static_cast<std::byte>(rng());
        }
        CHECK(crc64(buf) == crc64_bitwise(buf));
        Crc64 inc;
        const std::size_t cut = buf.empty() ? 0 : rng() % buf.size();
        inc.update(buf.data(), cut);
        inc.update(buf.data() + cut, buf.size() - cut);
        CHECK(inc.value() == crc64(buf));
    }
}

TEST_CASE("store size arithmetic") {
    const auto s = random_store(1, 2, 4, 1, "p");
    const auto bytes = encode_store(s);
    CHECK(store_header_size("p") == 33);
    CHECK(bytes.size() == store_header_size("p") + 32 + 8);
    CHECK(std::memcmp(bytes.data(), "M3EMBED1", 8) == 0);
}

TEST_CASE("store round trip is bitwise") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto s = random_store(1 + seed * 3, 1 + seed % 5, 1 + seed * 2, seed, "prov-" + std::to_string(seed));
        const auto bytes = encode_store(s);
        const auto back = decode_store(bytes);
        CHECK(back == s);
        CHECK(encode_store(back) == bytes);
    }
    TempDir dir("store");
    const auto s = random_store(7, 4, 8, 3);
    write_store(dir.path() / "e.m3e", s);
    CHECK(read_store(dir.path() / "e.m3e") == s);
    for (const auto& entry : std::filesystem::directory_iterator(dir.path())) {
        CHECK(entry.path().filename() == "e.m3e");  // no temporary left behind
    }
}

TEST_CASE("corrupted stores are rejected with distinct kinds") {
    const auto s = random_store(3, 2, 4, 5, "abc");
    const auto good = encode_store(s);
    const std::size_t header = store_header_size("abc");

    auto bad = good;
    bad[0] = std::byte{'X'};
    CHECK(kind_of([&] { decode_store(bad); }) == ErrorKind::kBadMagic);

    bad = good;
    put_u32(bad, 8, 2);
    CHECK(kind_of([&] { decode_store(bad); }) == ErrorKind::kVersionMismatch);

    for (std::size_t cut = 0; cut < good.size(); ++cut) {
        const std::span<const std::byte> prefix(good.data(), cut);
        const auto k = kind_of([&] { decode_store(prefix); });
        CHECK((k == ErrorKind::kTruncated || (cut < 8 && k == ErrorKind::kBadMagic)));
    }

    for (std::size_t at = header; at < good.size(); ++at) {
        bad = good;
        bad[at] ^= std::byte{0x10};
        CHECK(kind_of([&] { decode_store(bad); }) == ErrorKind::kChecksumMismatch);
    }

    bad = good;
    bad.push_back(std::byte{0});
    CHECK(kind_of([&] { decode_store(bad); }) == ErrorKind::kFormat);

    // A NaN payload with a valid checksum is still refused.
    bad = good;
    const float nan = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(bad.data() + header, &nan, 4);
    const std::uint64_t crc = crc64(std::span<const std::byte>(bad).subspan(header, 3 * 2 * 4 * 4));
    std::memcpy(bad.data() + bad.size() - 8, &crc, 8);
    CHECK(kind_of([&] { decode_store(bad); }) == ErrorKind::kFormat);
}

TEST_CASE("manifest JSON round trip") {
    auto m = make_synthetic_manifest(23, 5, 32, 16);
    m.corpus_id = "c1";
    const std::string text = manifest_to_json(m);
    const auto back = manifest_from_json(text);
    CHECK(back == m);
    CHECK(manifest_to_json(back) == text);

    TempDir dir("manifest");
    write_manifest(dir.path() / "m.json", m);
    CHECK(read_manifest(dir.path() / "m.json") == m);
    CHECK(read_text(dir.path() / "m.json") == text);
}

TEST_CASE("manifest validation") {
    const std::string ok = R"({"corpus_id":"c","dim":4,"tokens_per_page":2,"page_width_px":1,"page_height_px":1,
        "documents":[{"doc_id":"A","pages":[{"page_index":0,"image_path":"a0.png"},{"page_index":1,"image_path":"a1.png"}]},
                     {"doc_id":"B","pages":[{"page_index":0,"image_path":"b0.png"}]}]})";
    const auto m = manifest_from_json(ok);
    CHECK(m.page_count() == 3);
    CHECK(m.page(2).ref.doc.str() == "B");
    CHECK(m.page(1).image_path == "a1.png");

    std::string dup = ok;
    dup.replace(dup.find("\"B\""), 3, "\"A\"");
    CHECK(kind_of([&] { manifest_from_json(dup); }) == ErrorKind::kDuplicateId);

    std::string order = ok;
    order.replace(order.find("\"page_index\":1"), 14, "\"page_index\":2");
    CHECK(kind_of([&] { manifest_from_json(order); }) == ErrorKind::kFormat);

    CHECK(kind_of([&] { manifest_from_json("{not json"); }) == ErrorKind::kFormat);
    CHECK(kind_of([&] { manifest_from_json(R"({"corpus_id":"c"})"); }) == ErrorKind::kFormat);
}

TEST_CASE("flat index round trip searches identically") {
    const auto c = make_gaussian_corpus(40, 4, 8, 2, 10);
    const auto idx = PageIndex::build(c.manifest, c.store, {});
    const auto bytes = encode_index(idx);
    const auto back = decode_index(bytes, c.manifest, c.store);
    CHECK(encode_index(back) == bytes);
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto q = random_gaussian_embedding(3, 8, s);
        check_same_hits(back.search(q.view(), 5, OpenDomain{}), idx.search(q.view(), 5, OpenDomain{}));
    }
}

TEST_CASE("IVF round trips keep centroids and codes bitwise") {
    const auto c = make_gaussian_corpus(64, 8, 16, 3, 8);
    for (IndexKind kind : {IndexKind::kIvfFlat, IndexKind::kIvfPq}) {
        IndexConfig cfg;
        cfg.kind = kind;
        cfg.nlist = 10;
        cfg.nprobe = 3;
        cfg.m = 4;
        cfg.nbits = 8;
        cfg.kmeans.iters = 8;
        const auto idx = PageIndex::build(c.manifest, c.store, cfg);
        TempDir dir("index");
        save_index(dir.path() / "i.m3i", idx);
        const auto back = load_index(dir.path() / "i.m3i", c.manifest, c.store);
        CHECK(back.config() == idx.config());
        CHECK(back.centroids() == idx.centroids());
        CHECK(back.pq() == idx.pq());
        REQUIRE(back.nlist() == idx.nlist());
        for (std::size_t l = 0; l < idx.nlist(); ++l) {
            CHECK(back.lists()[l].vector_ids == idx.lists()[l].vector_ids);
            CHECK(back.lists()[l].codes_t == idx.lists()[l].codes_t);
            CHECK(back.lists()[l].vectors_t == idx.lists()[l].vectors_t);
        }
        CHECK(encode_index(back) == encode_index(idx));
        for (std::uint64_t s = 0; s < 10; ++s) {
            const auto q = random_gaussian_embedding(4, 16, 50 + s);
            check_same_hits(back.search(q.view(), 6, OpenDomain{}), idx.search(q.view(), 6, OpenDomain{}));
        }
    }
}

TEST_CASE("IVFPQ file size follows the layout") {
    const auto c = make_gaussian_corpus(64, 8, 16, 4, 8);
    IndexConfig cfg;
    cfg.kind = IndexKind::kIvfPq;
    cfg.nlist = 6;
    cfg.nprobe = 2;
    cfg.m = 4;
    cfg.nbits = 8;
    cfg.kmeans.iters = 5;
    const auto idx = PageIndex::build(c.manifest, c.store, cfg);
    const std::size_t tokens = 64 * 8;
    const std::size_t header = 8 + 4 * 4 + 8 + 8 + 6 * 4 + 8 + 4;
    const std::size_t ivf = 6 * 16 * 4 + 6 * 4 + tokens * 4;
    const std::size_t pq = 4 * 256 * 4 * 4 + tokens * 4;  // codebooks, then 4 code bytes per token
    CHECK(encode_index(idx).size() == header + ivf + pq + 8);
}

TEST_CASE("index attached to the wrong corpus is refused before search") {
    const auto c = make_gaussian_corpus(30, 4, 8, 5, 10);
    IndexConfig cfg;
    cfg.kind = IndexKind::kIvfFlat;
    cfg.nlist = 4;
    cfg.nprobe = 2;
    const auto bytes = encode_index(PageIndex::build(c.manifest, c.store, cfg));

    const auto other_dim = make_gaussian_corpus(30, 4, 6, 5, 10);
    CHECK(kind_of([&] { decode_index(bytes, other_dim.manifest, other_dim.store); }) ==
          ErrorKind::kDimensionMismatch);
    const auto other_pages = make_gaussian_corpus(31, 4, 8, 5, 10);
    CHECK(kind_of([&] { decode_index(bytes, other_pages.manifest, other_pages.store); }) ==
          ErrorKind::kDimensionMismatch);
    const auto other_values = make_gaussian_corpus(30, 4, 8, 6, 10);
    CHECK(kind_of([&] { decode_index(bytes, other_values.manifest, other_values.store); }) ==
          ErrorKind::kChecksumMismatch);
}

TEST_CASE("corrupted index bytes are rejected") {
    const auto c = make_gaussian_corpus(40, 4, 8, 7, 10);
    for (IndexKind kind : {IndexKind::kFlat, IndexKind::kIvfFlat, IndexKind::kIvfPq}) {
        IndexConfig cfg;
        cfg.kind = kind;
        cfg.nlist = 5;
        cfg.nprobe = 2;
        cfg.m = 2;
        cfg.nbits = 4;
        const auto good = encode_index(PageIndex::build(c.manifest, c.store, cfg));
        CHECK_NOTHROW(decode_index(good, c.manifest, c.store));

        for (std::size_t at = 0; at < good.size(); ++at) {
            auto bad = good;
            bad[at] ^= std::byte{0x04};
            CHECK_THROWS_AS(decode_index(bad, c.manifest, c.store), Error);
        }
        for (std::size_t cut = 0; cut < good.size(); cut += 1 + cut / 7) {
            const auto k = kind_of([&] { decode_index(std::span<const std::byte>(good.data(), cut), c.manifest, c.store); });
            CHECK((k == ErrorKind::kTruncated || (cut < 8 && k == ErrorKind::kBadMagic)));
        }
        auto bad = good;
        bad[0] = std::byte{'Y'};
        CHECK(kind_of([&] { decode_index(bad, c.manifest, c.store); }) == ErrorKind::kBadMagic);
        bad = good;
        put_u32(bad, 8, 7);
        reseal_index(bad);
        CHECK(kind_of([&] { decode_index(bad, c.manifest, c.store); }) == ErrorKind::kVersionMismatch);
        bad = good;
        bad[good.size() - 1] ^= std::byte{1};
        CHECK(kind_of([&] { decode_index(bad, c.manifest, c.store); }) == ErrorKind::kChecksumMismatch);
    }
}

TEST_CASE("QA examples round trip through JSON Lines") {
    std::vector<QAExample> xs(3);
    xs[0] = {"a", "Who?", {"Ann", "Anne"}, Hops::kSingle, {Modality::kText}, std::nullopt, std::nullopt};
    xs[1] = {"b",
             "Where \"quoted\"?",
             {"x"},
             Hops::kMulti,
             {Modality::kText, Modality::kTable},
             std::vector<PageKey>{{DocumentId("D1"), 3}, {DocumentId("D2"), 0}},
             DocumentId("D1")};
    xs[2] = {"c", "été?", {"oui"}, Hops::kSingle, {}, std::nullopt, DocumentId("D9")};
    TempDir dir("qa");
    write_examples(dir.path() / "qa.jsonl", xs);
    const auto back = read_examples(dir.path() / "qa.jsonl");
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back[i].id == xs[i].id);
        CHECK(back[i].question == xs[i].question);
        CHECK(back[i].gold_answers == xs[i].gold_answers);
        CHECK(back[i].hops == xs[i].hops);
        CHECK(back[i].gold_pages == xs[i].gold_pages);
        CHECK(back[i].doc == xs[i].doc);
        CHECK(example_to_json(back[i]) == example_to_json(xs[i]));
    }
    CHECK(back[1].modalities == std::vector<Modality>{Modality::kText, Modality::kTable});
}

TEST_CASE("QA loader reports the offending line") {
    TempDir dir("qa-bad");
    const auto path = dir.path() / "bad.jsonl";
    std::ofstream(path) << R"({"id":"a","question":"q","answers":["x"],"hops":"single","modalities":[]})" << "\n\n"
                        << R"({"id":"a","question":"q","answers":["y"],"hops":"single","modalities":[]})" << "\n";
    try {
        read_examples(path);
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::kDuplicateId);
        CHECK(std::string(e.what()).find("bad.jsonl:3:") != std::string::npos);
    }
    std::ofstream(path) << R"({"id":"a","question":"q","answers":[],"hops":"single","modalities":[]})" << "\n";
    CHECK_THROWS_AS(read_examples(path), Error);
    std::ofstream(path) << "{\n";
    try {
        read_examples(path);
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::kFormat);
        CHECK(std::string(e.what()).find("bad.jsonl:1:") != std::string::npos);
    }
}

TEST_CASE("atomic write replaces contents") {
    TempDir dir("atomic");
    atomic_write_text(dir.path() / "f.txt", "one");
    atomic_write_text(dir.path() / "f.txt", "two");
    CHECK(read_text(dir.path() / "f.txt") == "two");
    CHECK(kind_of([&] { read_file(dir.path() / "missing"); }) == ErrorKind::kIo);
}
