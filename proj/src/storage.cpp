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

#include "latepage/storage.h"

#include <unistd.h>

#include <bit>
#include <cmath>
#include <optional>
#include <cstring>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "latepage/crc64.h"
#include "latepage/error.h"

namespace latepage {

static_assert(std::endian::native == std::endian::little, "binary formats are written in host order");

namespace {

using json = nlohmann::ordered_json;

class ByteWriter {
public:
    template <typename T>
    void
    put(T value) {
        static_assert(std::is_trivially_copyable_v<T>);
        const auto* p = reinterpret_cast<const std::byte*>(&value);
        out_.insert(out_.end(), p, p + sizeof(T));
    }

    void
    put_bytes(const void* data, std::size_t size) {
        const auto* p = static_cast<const std::byte*>(data);
        out_.insert(out_.end(), p, p + size);
    }

    template <typename T>
    void
    put_array(std::span<const T> values) {
        put_bytes(values.data(), values.size_bytes());
    }

    std::vector<std::byte>&
    bytes() {
        return out_;
    }

private:
    std::vector<std::byte> out_;
};

class ByteReader {
public:
    ByteReader(std::span<const std::byte> bytes, const char* what) : bytes_(bytes), what_(what) {
    }

    template <typename T>
    T
    get() {
        T value;
        std::memcpy(&value, take(sizeof(T)), sizeof(T));
        return value;
    }

    template <typename T>
    std::vector<T>
    get_array(std::size_t count) {
        if (count > remaining() / sizeof(T)) {
            truncated();
        }
        std::vector<T> out(count);
        std::memcpy(out.data(), take(count * sizeof(T)), count * sizeof(T));
        return out;
    }

    const std::byte*
    take(std::size_t size) {
        if (size > remaining()) {
            truncated();
        }
        const std::byte* p = bytes_.data() + pos_;
        pos_ += size;
        return p;
    }

    std::size_t
    remaining() const {
        return bytes_.size() - pos_;
    }
    std::size_t
    position() const {
        return pos_;
    }

private:
    [[noreturn]] void
    truncated() const {
        throw Error(ErrorKind::kTruncated, std::string(what_) + " is truncated");
    }

    std::span<const std::byte> bytes_;
    const char* what_;
    std::size_t pos_ = 0;
};

void
check_magic(ByteReader& r, const char (&magic)[8], const char* what) {
    if (r.remaining() < 8) {
        throw Error(ErrorKind::kTruncated, std::string(what) + " is truncated");
    }
    if (std::memcmp(r.take(8), magic, 8) != 0) {
        throw Error(ErrorKind::kBadMagic, std::string(what) + " has a bad magic number");
    }
}

void
check_version(ByteReader& r, const char* what) {
    const auto version = r.get<std::uint32_t>();
    if (version != kFormatVersion) {
        throw Error(ErrorKind::kVersionMismatch, std::string(what) + " version " + std::to_string(version) +
                                                     " is not supported (expected " +
                                                     std::to_string(kFormatVersion) + ")");
    }
}

template <typename T>
T
field(const json& j, const char* key) {
    if (!j.contains(key)) {
        throw Error(ErrorKind::kFormat, std::string("missing field: ") + key);
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::kFormat, std::string("bad field ") + key + ": " + e.what());
    }
}

json
parse_json(std::string_view text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::kFormat, std::string(what) + " is not valid JSON: " + e.what());
    }
}

}  // namespace

std::size_t
store_header_size(std::string_view provider_id) {
    return 8 + 4 + 4 + 4 + 8 + 4 + provider_id.size();
}

std::vector<std::byte>
encode_store(const EmbeddingStore& store) {
    ByteWriter w;
    w.bytes().reserve(store_header_size(store.provider_id()) + store.data().size_bytes() + 8);
    w.put_bytes(kStoreMagic, 8);
    w.put<std::uint32_t>(kFormatVersion);
    w.put<std::uint32_t>(store.dim());
    w.put<std::uint32_t>(store.tokens_per_page());
    w.put<std::uint64_t>(store.page_count());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(store.provider_id().size()));
    w.put_bytes(store.provider_id().data(), store.provider_id().size());
    w.put_array(store.data());
    w.put<std::uint64_t>(store.payload_crc());
    return std::move(w.bytes());
}

EmbeddingStore
decode_store(std::span<const std::byte> bytes) {
    constexpr const char* what = "embedding store";
    ByteReader r(bytes, what);
    check_magic(r, kStoreMagic, what);
    check_version(r, what);
    const auto dim = r.get<std::uint32_t>();
    const auto tpp = r.get<std::uint32_t>();
    const auto pages = r.get<std::uint64_t>();
    const auto id_len = r.get<std::uint32_t>();
    const std::byte* id = r.take(id_len);
    std::string provider(reinterpret_cast<const char*>(id), id_len);
    if (dim == 0 || tpp == 0) {
        throw Error(ErrorKind::kFormat, "embedding store header has a zero dim or tokens_per_page");
    }
    const std::uint64_t floats = pages * tpp * dim;
    if (floats > r.remaining() / 4 || r.remaining() - floats * 4 < 8) {
        throw Error(ErrorKind::kTruncated, "embedding store is truncated");
    }
    if (r.remaining() != floats * 4 + 8) {
        throw Error(ErrorKind::kFormat, "embedding store has trailing bytes");
    }
    const std::byte* payload = r.take(floats * 4);
    const auto stored_crc = r.get<std::uint64_t>();
    if (crc64({payload, floats * 4}) != stored_crc) {
        throw Error(ErrorKind::kChecksumMismatch, "embedding store payload checksum mismatch");
    }
    std::vector<float> data(floats);
    std::memcpy(data.data(), payload, floats * 4);
    for (float v : data) {
        if (!std::isfinite(v)) {
            throw Error(ErrorKind::kFormat, "embedding store contains a non-finite value");
        }
    }
    return {dim, tpp, pages, std::move(provider), std::move(data)};
}

void
write_store(const std::filesystem::path& path, const EmbeddingStore& store) {
    atomic_write(path, encode_store(store));
}

EmbeddingStore
read_store(const std::filesystem::path& path) {
    return decode_store(read_file(path));
}

std::string
manifest_to_json(const CorpusManifest& manifest) {
    json j;
    j["corpus_id"] = manifest.corpus_id;
    j["dim"] = manifest.dim;
    j["tokens_per_page"] = manifest.tokens_per_page;
    j["page_width_px"] = manifest.page_width_px;
    j["page_height_px"] = manifest.page_height_px;
    json docs = json::array();
    for (const auto& doc : manifest.documents()) {
        json pages = json::array();
        for (std::uint32_t p = 0; p < doc.page_count; ++p) {
            const auto& entry = manifest.page(doc.first_global_id + p);
            pages.push_back({{"page_index", p}, {"image_path", entry.image_path}});
        }
        docs.push_back({{"doc_id", doc.id.str()}, {"pages", std::move(pages)}});
    }
    j["documents"] = std::move(docs);
    return j.dump(2) + "\n";
}

CorpusManifest
manifest_from_json(std::string_view text) {
    const json j = parse_json(text, "manifest");
    std::vector<std::pair<DocumentId, std::uint32_t>> docs;
    std::vector<std::string> paths;
    const json& jdocs = j.contains("documents") ? j.at("documents") : json();
    if (!jdocs.is_array()) {
        throw Error(ErrorKind::kFormat, "manifest needs a documents array");
    }
    for (const auto& d : jdocs) {
        const auto id = field<std::string>(d, "doc_id");
        if (id.empty()) {
            throw Error(ErrorKind::kFormat, "manifest has an empty doc_id");
        }
        const json& pages = d.contains("pages") ? d.at("pages") : json();
        if (!pages.is_array()) {
            throw Error(ErrorKind::kFormat, "document " + id + " needs a pages array");
        }
        std::uint32_t expected = 0;
        for (const auto& p : pages) {
            if (field<std::uint32_t>(p, "page_index") != expected) {
                throw Error(ErrorKind::kFormat, "document " + id + " pages must be listed in order from 0");
            }
            paths.push_back(field<std::string>(p, "image_path"));
            ++expected;
        }
        docs.emplace_back(DocumentId(id), expected);
    }
    CorpusManifest m = flatten_corpus(docs);
    m.corpus_id = field<std::string>(j, "corpus_id");
    m.dim = field<std::uint32_t>(j, "dim");
    m.tokens_per_page = field<std::uint32_t>(j, "tokens_per_page");
    m.page_width_px = field<std::uint32_t>(j, "page_width_px");
    m.page_height_px = field<std::uint32_t>(j, "page_height_px");
    if (m.dim == 0 || m.tokens_per_page == 0) {
        throw Error(ErrorKind::kFormat, "manifest dim and tokens_per_page must be >= 1");
    }
    for (std::uint32_t g = 0; g < paths.size(); ++g) {
        m.set_image_path(g, std::move(paths[g]));
    }
    return m;
}

void
write_manifest(const std::filesystem::path& path, const CorpusManifest& manifest) {
    atomic_write_text(path, manifest_to_json(manifest));
}

CorpusManifest
read_manifest(const std::filesystem::path& path) {
    return manifest_from_json(read_text(path));
}

std::vector<std::byte>
encode_index(const PageIndex& index) {
    const IndexConfig& c = index.config();
    ByteWriter w;
    w.put_bytes(kIndexMagic, 8);
    w.put<std::uint32_t>(kFormatVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(c.kind));
    w.put<std::uint32_t>(index.store().dim());
    w.put<std::uint32_t>(index.store().tokens_per_page());
    w.put<std::uint64_t>(index.store().page_count());
    w.put<std::uint64_t>(index.store_crc());
    w.put<std::uint32_t>(c.nlist);
    w.put<std::uint32_t>(c.nprobe);
    w.put<std::uint32_t>(c.m);
    w.put<std::uint32_t>(c.nbits);
    w.put<std::uint32_t>(c.candidate_pages);
    w.put<std::uint32_t>(c.kmeans.iters);
    w.put<std::uint64_t>(c.kmeans.seed);
    w.put<std::uint32_t>(c.kmeans.restarts);
    if (c.kind != IndexKind::kFlat) {
        w.put_array(std::span<const float>(index.centroids()));
        for (const auto& list : index.lists()) {
            w.put<std::uint32_t>(static_cast<std::uint32_t>(list.size()));
            w.put_array(std::span<const std::uint32_t>(list.vector_ids));
        }
    }
    if (c.kind == IndexKind::kIvfPq) {
        w.put_array(std::span<const float>(index.pq().codebooks()));
        const std::size_t m = index.pq().m();
        for (const auto& list : index.lists()) {
            const std::size_t n = list.size();
            for (std::size_t j = 0; j < n; ++j) {
                for (std::size_t s = 0; s < m; ++s) {
                    w.put<std::uint8_t>(list.codes_t[s * n + j]);
                }
            }
        }
    }
    const auto& bytes = w.bytes();
    const std::uint64_t crc = crc64(std::span<const std::byte>(bytes).subspan(8));
    w.put<std::uint64_t>(crc);
    return std::move(w.bytes());
}

PageIndex
decode_index(std::span<const std::byte> bytes, std::shared_ptr<const CorpusManifest> manifest,
             std::shared_ptr<const EmbeddingStore> store) {
    constexpr const char* what = "index file";
    ByteReader head(bytes, what);
    check_magic(head, kIndexMagic, what);
    if (bytes.size() < 8 + 4 + 8) {
        throw Error(ErrorKind::kTruncated, "index file is truncated");
    }
    const std::size_t body_end = bytes.size() - 8;
    ByteReader r(bytes.first(body_end), what);
    r.take(8);

    // Structure is parsed before the checksum so that a short file reports
    // truncation and another version reports itself; any other problem is
    // only reported once the checksum holds.
    std::optional<Error> parse_error;
    IndexConfig c;
    std::uint32_t dim = 0;
    std::uint32_t tpp = 0;
    std::uint64_t pages = 0;
    std::uint64_t store_crc = 0;
    std::vector<float> centroids;
    std::vector<std::vector<std::uint32_t>> ids;
    std::optional<ProductQuantizer> pq;
    std::vector<std::vector<std::uint8_t>> codes;
    try {
        check_version(r, what);
        const auto kind = r.get<std::uint32_t>();
        if (kind > static_cast<std::uint32_t>(IndexKind::kIvfPq)) {
            throw Error(ErrorKind::kFormat, "index file has an unknown kind " + std::to_string(kind));
        }
        c.kind = static_cast<IndexKind>(kind);
        dim = r.get<std::uint32_t>();
        tpp = r.get<std::uint32_t>();
        pages = r.get<std::uint64_t>();
        store_crc = r.get<std::uint64_t>();
        c.nlist = r.get<std::uint32_t>();
        c.nprobe = r.get<std::uint32_t>();
        c.m = r.get<std::uint32_t>();
        c.nbits = r.get<std::uint32_t>();
        c.candidate_pages = r.get<std::uint32_t>();
        c.kmeans.iters = r.get<std::uint32_t>();
        c.kmeans.seed = r.get<std::uint64_t>();
        c.kmeans.restarts = r.get<std::uint32_t>();
        if (c.kind != IndexKind::kFlat) {
            centroids = r.get_array<float>(static_cast<std::size_t>(c.nlist) * dim);
            if (c.nlist > r.remaining() / 4) {
                throw Error(ErrorKind::kTruncated, "index file is truncated");
            }
            ids.resize(c.nlist);
            for (auto& list : ids) {
                list = r.get_array<std::uint32_t>(r.get<std::uint32_t>());
            }
        }
        if (c.kind == IndexKind::kIvfPq) {
            pq.emplace(dim, c.m, c.nbits);
            pq->set_codebooks(r.get_array<float>(pq->m() * pq->ksub() * pq->dsub()));
            codes.resize(c.nlist);
            for (std::uint32_t l = 0; l < c.nlist; ++l) {
                codes[l] = r.get_array<std::uint8_t>(ids[l].size() * c.m);
            }
        }
        if (r.remaining() != 0) {
            throw Error(ErrorKind::kFormat, "index file has trailing bytes");
        }
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::kTruncated || e.kind() == ErrorKind::kVersionMismatch) {
            throw;
        }
        parse_error = e;
    }

    std::uint64_t stored_crc;
    std::memcpy(&stored_crc, bytes.data() + body_end, 8);
    if (crc64(bytes.subspan(8, body_end - 8)) != stored_crc) {
        throw Error(ErrorKind::kChecksumMismatch, "index file checksum mismatch");
    }
    if (parse_error) {
        throw *parse_error;
    }
    if (dim != store->dim() || tpp != store->tokens_per_page() || pages != store->page_count()) {
        throw Error(ErrorKind::kDimensionMismatch,
                    "index was built for dim=" + std::to_string(dim) + " tokens_per_page=" + std::to_string(tpp) +
                        " pages=" + std::to_string(pages) + " but the attached store has dim=" +
                        std::to_string(store->dim()) + " tokens_per_page=" +
                        std::to_string(store->tokens_per_page()) + " pages=" +
                        std::to_string(store->page_count()));
    }
    return PageIndex::assemble(std::move(manifest), std::move(store), c, store_crc, std::move(centroids),
                               std::move(ids), std::move(pq), std::move(codes));
}

void
save_index(const std::filesystem::path& path, const PageIndex& index) {
    atomic_write(path, encode_index(index));
}

PageIndex
load_index(const std::filesystem::path& path, std::shared_ptr<const CorpusManifest> manifest,
           std::shared_ptr<const EmbeddingStore> store) {
    return decode_index(read_file(path), std::move(manifest), std::move(store));
}

std::string
example_to_json(const QAExample& example) {
    json j;
    j["id"] = example.id;
    j["question"] = example.question;
    j["answers"] = example.gold_answers;
    j["hops"] = std::string(hops_name(example.hops));
    json mods = json::array();
    for (Modality m : example.modalities) {
        mods.push_back(std::string(modality_name(m)));
    }
    j["modalities"] = std::move(mods);
    if (example.gold_pages) {
        json pages = json::array();
        for (const auto& p : *example.gold_pages) {
            pages.push_back({{"doc_id", p.doc.str()}, {"page_index", p.page_index}});
        }
        j["gold_pages"] = std::move(pages);
    }
    if (example.doc) {
        j["doc_id"] = example.doc->str();
    }
    return j.dump();
}

QAExample
example_from_json(std::string_view line) {
    const json j = parse_json(line, "example");
    QAExample e;
    e.id = field<std::string>(j, "id");
    e.question = field<std::string>(j, "question");
    e.gold_answers = field<std::vector<std::string>>(j, "answers");
    e.hops = j.contains("hops") ? parse_hops(field<std::string>(j, "hops")) : Hops::kSingle;
    if (j.contains("modalities")) {
        std::set<Modality> mods;
        for (const auto& name : field<std::vector<std::string>>(j, "modalities")) {
            mods.insert(parse_modality(name));
        }
        e.modalities.assign(mods.begin(), mods.end());
    }
    if (j.contains("gold_pages")) {
        std::vector<PageKey> pages;
        for (const auto& p : j.at("gold_pages")) {
            pages.push_back({DocumentId(field<std::string>(p, "doc_id")), field<std::uint32_t>(p, "page_index")});
        }
        e.gold_pages = std::move(pages);
    }
    if (j.contains("doc_id")) {
        e.doc = DocumentId(field<std::string>(j, "doc_id"));
    }
    validate_example(e);
    return e;
}

std::vector<QAExample>
read_examples(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::kIo, "cannot open examples file: " + path.string());
    }
    std::vector<QAExample> out;
    std::set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            out.push_back(example_from_json(line));
        } catch (const Error& e) {
            throw Error(e.kind(), path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (!ids.insert(out.back().id).second) {
            throw Error(ErrorKind::kDuplicateId, path.string() + ":" + std::to_string(line_no) +
                                                     ": duplicate example id: " + out.back().id);
        }
    }
    return out;
}

void
write_examples(const std::filesystem::path& path, const std::vector<QAExample>& examples) {
    std::string text;
    for (const auto& e : examples) {
        text += example_to_json(e);
        text += '\n';
    }
    atomic_write_text(path, text);
}

void
atomic_write(const std::filesystem::path& path, std::span<const std::byte> bytes) {
    std::filesystem::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error(ErrorKind::kIo, "cannot open for writing: " + tmp.string());
        }
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) {
            std::filesystem::remove(tmp);
            throw Error(ErrorKind::kIo, "write failed: " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw Error(ErrorKind::kIo, "cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
    }
}

void
atomic_write_text(const std::filesystem::path& path, std::string_view text) {
    atomic_write(path, std::as_bytes(std::span<const char>(text.data(), text.size())));
}

std::vector<std::byte>
read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::kIo, "cannot open: " + path.string());
    }
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    std::vector<std::byte> out(size);
    in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(size));
    if (!in) {
        throw Error(ErrorKind::kIo, "read failed: " + path.string());
    }
    return out;
}

std::string
read_text(const std::filesystem::path& path) {
    auto bytes = read_file(path);
    return {reinterpret_cast<const char*>(bytes.data()), bytes.size()};
}

}  // namespace latepage
