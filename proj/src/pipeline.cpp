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

#include "latepage/pipeline.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "latepage/error.h"
#include "latepage/scoring.h"
#include "latepage/storage.h"

namespace latepage {

namespace {

using Clock = std::chrono::steady_clock;

double
elapsed_ms(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::uint64_t
fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

bool
is_word_byte(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

std::vector<std::string>
distinct(std::vector<std::string> words) {
    std::set<std::string> seen;
    std::vector<std::string> out;
    for (auto& w : words) {
        if (seen.insert(w).second) {
            out.push_back(std::move(w));
        }
    }
    return out;
}

std::optional<std::string>
read_optional_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        return std::nullopt;
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string
trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string
sidecar_field(std::string_view text, std::string_view key) {
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (line.size() > key.size() && line.compare(0, key.size(), key) == 0 && line[key.size()] == ':') {
            return trim(std::string_view(line).substr(key.size() + 1));
        }
    }
    return {};
}

std::filesystem::path
partial_path(const std::filesystem::path& store_path) {
    auto p = store_path;
    p += ".partial";
    return p;
}

std::filesystem::path
partial_list_path(const std::filesystem::path& store_path) {
    auto p = store_path;
    p += ".partial.json";
    return p;
}

template <typename Fn>
void
parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, count));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                fn(i);
            }
        });
    }
}

}  // namespace

std::filesystem::path
sidecar_path(const std::filesystem::path& image_path) {
    auto p = image_path;
    p += ".txt";
    return p;
}

std::vector<std::string>
tokenize_words(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && !is_word_byte(static_cast<unsigned char>(text[i]))) {
            ++i;
        }
        std::string word;
        while (i < text.size() && is_word_byte(static_cast<unsigned char>(text[i]))) {
            const char c = text[i++];
            word.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);
        }
        if (!word.empty()) {
            out.push_back(std::move(word));
        }
    }
    return out;
}

MockEmbedder::MockEmbedder(std::uint32_t dim, std::uint32_t tokens_per_page, std::uint64_t seed)
    : dim_(dim), tokens_per_page_(tokens_per_page), seed_(seed) {
    if (dim == 0 || tokens_per_page == 0) {
        throw Error(ErrorKind::kConfig, "mock embedder needs dim >= 1 and tokens_per_page >= 1");
    }
}

std::string
MockEmbedder::identity() const {
    return "mock/1 dim=" + std::to_string(dim_) + " tokens_per_page=" + std::to_string(tokens_per_page_) +
           " seed=" + std::to_string(seed_);
}

std::vector<float>
MockEmbedder::seeded_row(std::uint64_t seed) const {
    std::mt19937_64 rng(seed ^ (seed_ * 0x9E3779B97F4A7C15ULL));
    std::vector<float> row(dim_);
    double norm = 0.0;
    for (auto& v : row) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        v = static_cast<float>(2.0 * u - 1.0);
        norm += static_cast<double>(v) * v;
    }
    if (norm == 0.0) {
        row[0] = 1.0F;
        return row;
    }
    const double inv = 1.0 / std::sqrt(norm);
    for (auto& v : row) {
        v = static_cast<float>(v * inv);
    }
    return row;
}

std::vector<float>
MockEmbedder::word_row(std::string_view word) const {
    return seeded_row(fnv1a64(word));
}

MultiVecEmbedding
MockEmbedder::embed_page_text(std::string_view text) const {
    const auto words = distinct(tokenize_words(text));
    std::vector<float> data;
    data.reserve(static_cast<std::size_t>(tokens_per_page_) * dim_);
    std::size_t rows = 0;
    for (const auto& w : words) {
        if (rows == tokens_per_page_) {
            break;
        }
        const auto r = word_row(w);
        data.insert(data.end(), r.begin(), r.end());
        ++rows;
    }
    const std::uint64_t base = fnv1a64(std::string("\x1f") + std::string(text));
    for (std::uint64_t i = 0; rows < tokens_per_page_; ++i, ++rows) {
        const auto r = seeded_row(base + 0x632BE59BD9B4E019ULL * (i + 1));
        data.insert(data.end(), r.begin(), r.end());
    }
    return {tokens_per_page_, dim_, std::move(data)};
}

MultiVecEmbedding
MockEmbedder::embed_page(const PageArtifact& page) const {
    if (auto text = read_optional_text(sidecar_path(page.image_path))) {
        return embed_page_text(*text);
    }
    if (auto bytes = read_optional_text(page.image_path)) {
        return embed_page_text("\x1e" + std::to_string(fnv1a64(*bytes)));
    }
    throw Error(ErrorKind::kIo, "page artifact unreadable: " + page.image_path.string());
}

MultiVecEmbedding
MockEmbedder::embed_query(std::string_view text) const {
    const auto words = distinct(tokenize_words(text));
    if (words.empty()) {
        return {1, dim_, seeded_row(fnv1a64(text))};
    }
    std::vector<float> data;
    data.reserve(words.size() * dim_);
    for (const auto& w : words) {
        const auto r = word_row(w);
        data.insert(data.end(), r.begin(), r.end());
    }
    return {words.size(), dim_, std::move(data)};
}

std::string
EchoGenerator::generate(std::string_view question, std::span<const PageArtifact>) const {
    return std::string(question);
}

std::string
KeywordStubGenerator::generate(std::string_view question, std::span<const PageArtifact> pages) const {
    const auto qwords = tokenize_words(question);
    const std::set<std::string> wanted(qwords.begin(), qwords.end());
    for (const auto& page : pages) {
        const auto text = read_optional_text(sidecar_path(page.image_path));
        if (!text) {
            continue;
        }
        for (const auto& w : tokenize_words(sidecar_field(*text, "keywords"))) {
            if (wanted.count(w) != 0) {
                return sidecar_field(*text, "answer");
            }
        }
    }
    return {};
}

void
validate_pipeline_config(const PipelineConfig& config, const AnswerGenerator& generator) {
    if (config.k == 0) {
        throw Error(ErrorKind::kConfig, "retrieval depth k must be >= 1");
    }
    if (config.generator_pages == 0 || config.generator_pages > std::min(config.k, generator.max_pages())) {
        throw Error(ErrorKind::kConfig, "generator_pages=" + std::to_string(config.generator_pages) +
                                            " must be in [1, min(k=" + std::to_string(config.k) +
                                            ", max_pages=" + std::to_string(generator.max_pages()) + ")]");
    }
}

PageArtifact
resolve_page(const CorpusManifest& manifest, const std::filesystem::path& base_dir, const PageRef& ref) {
    const auto& entry = manifest.page(ref.global_id);
    std::filesystem::path p(entry.image_path);
    if (p.is_relative()) {
        p = base_dir / p;
    }
    return {entry.ref, p};
}

EmbedSummary
embed_corpus(const CorpusManifest& manifest, const std::filesystem::path& base_dir,
             const EmbedderProvider& provider, const std::filesystem::path& store_path, std::size_t workers) {
    const auto caps = provider.capabilities();
    if (caps.dim != manifest.dim || caps.tokens_per_page != manifest.tokens_per_page) {
        throw Error(ErrorKind::kDimensionMismatch,
                    "provider " + provider.identity() + " emits dim=" + std::to_string(caps.dim) +
                        " tokens_per_page=" + std::to_string(caps.tokens_per_page) + " but the manifest declares dim=" +
                        std::to_string(manifest.dim) + " tokens_per_page=" + std::to_string(manifest.tokens_per_page));
    }
    const std::string identity = provider.identity();
    const std::size_t n = manifest.page_count();
    EmbedSummary summary;

    if (std::filesystem::exists(store_path)) {
        EmbeddingStore existing = read_store(store_path);
        if (existing.provider_id() == identity && existing.dim() == manifest.dim &&
            existing.tokens_per_page() == manifest.tokens_per_page && existing.page_count() == n) {
            summary.reused = n;
            summary.store = std::make_shared<const EmbeddingStore>(std::move(existing));
            return summary;
        }
    }

    EmbeddingStore store(manifest.dim, manifest.tokens_per_page, n, identity);
    std::vector<std::uint8_t> done(n, 0);
    if (std::filesystem::exists(partial_path(store_path)) && std::filesystem::exists(partial_list_path(store_path))) {
        // A damaged checkpoint only costs the re-embedding; start over.
        std::optional<EmbeddingStore> partial;
        try {
            partial = read_store(partial_path(store_path));
        } catch (const Error&) {
        }
        const auto list = nlohmann::json::parse(read_text(partial_list_path(store_path)), nullptr, false);
        if (partial && list.is_object() && list.value("provider_id", "") == identity &&
            partial->provider_id() == identity && partial->dim() == manifest.dim &&
            partial->tokens_per_page() == manifest.tokens_per_page && partial->page_count() == n &&
            list.contains("embedded") && list.at("embedded").is_array()) {
            store = std::move(*partial);
            for (const auto& id : list.at("embedded")) {
                if (id.is_number_unsigned() && id.get<std::uint64_t>() < n) {
                    done[id.get<std::uint64_t>()] = 1;
                }
            }
        }
    }

    std::vector<std::uint32_t> todo;
    for (std::uint32_t g = 0; g < n; ++g) {
        if (done[g] != 0) {
            ++summary.reused;
        } else {
            todo.push_back(g);
        }
    }
    std::vector<std::optional<std::string>> errors(todo.size());
    parallel_for(todo.size(), workers, [&](std::size_t i) {
        const std::uint32_t g = todo[i];
        try {
            const auto artifact = resolve_page(manifest, base_dir, manifest.page(g).ref);
            // Distinct pages never share a block, so concurrent writes do not overlap.
            store.set_page(g, provider.embed_page(artifact));
            done[g] = 1;
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < todo.size(); ++i) {
        if (errors[i]) {
            summary.failures.push_back({todo[i], *errors[i]});
        } else {
            ++summary.embedded;
        }
    }

    if (summary.failures.empty()) {
        write_store(store_path, store);
        std::filesystem::remove(partial_path(store_path));
        std::filesystem::remove(partial_list_path(store_path));
        summary.store = std::make_shared<const EmbeddingStore>(std::move(store));
    } else {
        write_store(partial_path(store_path), store);
        nlohmann::ordered_json list;
        list["provider_id"] = identity;
        list["embedded"] = nlohmann::json::array();
        for (std::uint32_t g = 0; g < n; ++g) {
            if (done[g] != 0) {
                list["embedded"].push_back(g);
            }
        }
        atomic_write_text(partial_list_path(store_path), list.dump() + "\n");
    }
    return summary;
}

RetrievalResult
retrieve(const Query& query, const PageIndex& index, const PipelineConfig& config) {
    return index.search(query, config.k, config.search);
}

AnswerOutcome
answer(const Query& query, const RetrievalResult& hits, const AnswerGenerator& generator,
       const PipelineConfig& config, const CorpusManifest& manifest, const std::filesystem::path& base_dir) {
    if (hits.hits.empty()) {
        throw Error(ErrorKind::kInvalidArgument, "answer() needs at least one retrieved page");
    }
    const std::size_t n = std::min({config.generator_pages, hits.hits.size(), generator.max_pages()});
    AnswerOutcome out;
    out.trace.generator = generator.identity();
    std::vector<PageArtifact> pages;
    for (std::size_t i = 0; i < n; ++i) {
        pages.push_back(resolve_page(manifest, base_dir, hits.hits[i].page));
        out.trace.pages_used.push_back(hits.hits[i].page);
        out.trace.scores.push_back(hits.hits[i].score);
    }
    const auto start = Clock::now();
    for (std::size_t attempt = 0;; ++attempt) {
        out.trace.attempts = attempt + 1;
        try {
            out.answer = generator.generate(query.text, pages);
            break;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::kTransport) {
                throw;
            }
            if (attempt >= config.retry.backoff.size()) {
                out.trace.latency_ms = elapsed_ms(start);
                throw GenerationError(std::string("generator failed after ") + std::to_string(attempt + 1) +
                                          " attempts: " + e.what(),
                                      out.trace);
            }
            const auto delay = config.retry.backoff[attempt];
            if (config.retry.sleep) {
                config.retry.sleep(delay);
            } else {
                std::this_thread::sleep_for(delay);
            }
        }
    }
    out.trace.latency_ms = elapsed_ms(start);
    return out;
}

std::vector<std::size_t>
recall_depths(std::size_t k) {
    std::set<std::size_t> depths;
    for (std::size_t d : {std::size_t{1}, std::size_t{2}, std::size_t{4}, k}) {
        if (d >= 1 && d <= k) {
            depths.insert(d);
        }
    }
    return {depths.begin(), depths.end()};
}

EvalReport
run_benchmark(const std::vector<QAExample>& examples, const Pipeline& pipeline, std::string config_json) {
    const PipelineConfig& config = pipeline.config;
    validate_pipeline_config(config, *pipeline.generator);
    const CorpusManifest& manifest = pipeline.index->manifest();
    std::vector<ExampleRecord> records(examples.size());
    parallel_for(examples.size(), config.workers, [&](std::size_t i) {
        const QAExample& ex = examples[i];
        ExampleRecord& r = records[i];
        r.id = ex.id;
        r.question = ex.question;
        r.hops = ex.hops;
        r.modalities = ex.modalities;
        r.generator = pipeline.generator->identity();
        try {
            Scope scope = OpenDomain{};
            if (config.mode == DomainMode::kClosed) {
                if (!ex.doc) {
                    throw Error(ErrorKind::kInvalidArgument, "closed-domain example has no doc_id");
                }
                scope = ClosedDomain{*ex.doc};
            }
            Query query{ex.id, ex.question, pipeline.embedder->embed_query(ex.question), scope};
            const auto t0 = Clock::now();
            const RetrievalResult hits = retrieve(query, *pipeline.index, config);
            r.retrieval_ms = elapsed_ms(t0);
            r.hits = hits.hits;
            if (ex.gold_pages) {
                std::vector<std::uint32_t> gold;
                for (const auto& key : *ex.gold_pages) {
                    auto g = manifest.global_id(key.doc, key.page_index);
                    if (!g) {
                        throw Error(ErrorKind::kNotFound, "gold page " + key.doc.str() + "/" +
                                                              std::to_string(key.page_index) + " not in corpus");
                    }
                    gold.push_back(*g);
                }
                for (std::size_t depth : recall_depths(config.k)) {
                    r.recall_at_k[depth] = recall_at_k(hits.hits, gold, depth);
                }
            }
            try {
                AnswerOutcome out = answer(query, hits, *pipeline.generator, config, manifest, pipeline.base_dir);
                r.pages_used = out.trace.pages_used;
                r.generation_ms = out.trace.latency_ms;
                r.answer = std::move(out.answer);
            } catch (const GenerationError& e) {
                r.pages_used = e.trace().pages_used;
                r.generation_ms = e.trace().latency_ms;
                throw;
            }
            r.em = exact_match(r.answer, ex.gold_answers);
            r.f1 = token_f1(r.answer, ex.gold_answers);
            r.anls = anls(r.answer, ex.gold_answers);
        } catch (const std::exception& e) {
            r.error = e.what();
        }
    });
    return build_report(std::move(records), std::move(config_json));
}

}  // namespace latepage
