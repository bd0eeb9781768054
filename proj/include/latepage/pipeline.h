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

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "latepage/core.h"
#include "latepage/embedding_store.h"
#include "latepage/error.h"
#include "latepage/index.h"
#include "latepage/metrics.h"

namespace latepage {

/// A page as handed to providers: identity plus the resolved image path.
struct PageArtifact {
    PageRef ref;
    std::filesystem::path image_path;
};

/// Sidecar text for a page image: `<image_path>.txt`.
std::filesystem::path
sidecar_path(const std::filesystem::path& image_path);

struct EmbedderCapabilities {
    std::uint32_t dim = 0;
    std::uint32_t tokens_per_page = 0;
};

/// Produces page and query embeddings in one shared space. embed_page must
/// return exactly tokens_per_page rows; both must match dim. Implementations
/// are called from several workers at once and must be thread-safe.
class EmbedderProvider {
public:
    virtual ~EmbedderProvider() = default;

    virtual std::string
    identity() const = 0;
    virtual EmbedderCapabilities
    capabilities() const = 0;
    virtual MultiVecEmbedding
    embed_page(const PageArtifact& page) const = 0;
    virtual MultiVecEmbedding
    embed_query(std::string_view text) const = 0;
};

/// Answers a question from up to max_pages page images given in rank order.
/// Transport failures throw Error(kTransport); anything the model says,
/// refusals included, is returned as the answer.
class AnswerGenerator {
public:
    virtual ~AnswerGenerator() = default;

    virtual std::string
    identity() const = 0;
    virtual std::size_t
    max_pages() const = 0;
    virtual std::string
    generate(std::string_view question, std::span<const PageArtifact> pages) const = 0;
};

/// Lowercased maximal runs of ASCII letters/digits (bytes >= 0x80 count as
/// word characters), in order of appearance.
std::vector<std::string>
tokenize_words(std::string_view text);

/// Deterministic stand-in for a real embedder. Every distinct word maps to a
/// fixed pseudo-random unit vector seeded from its FNV-1a hash, so a query
/// word that also appears on a page reproduces one of that page's rows
/// exactly. Pages embed their sidecar text: one row per distinct word (first
/// tokens_per_page words), the rest filled with rows seeded from the whole
/// text. A page without a sidecar embeds the image bytes' hash as filler; a
/// page with neither fails. Queries get one row per distinct word.
class MockEmbedder : public EmbedderProvider {
public:
    MockEmbedder(std::uint32_t dim, std::uint32_t tokens_per_page, std::uint64_t seed = 0);

    std::string
    identity() const override;
    EmbedderCapabilities
    capabilities() const override {
        return {dim_, tokens_per_page_};
    }
    MultiVecEmbedding
    embed_page(const PageArtifact& page) const override;
    MultiVecEmbedding
    embed_query(std::string_view text) const override;

    MultiVecEmbedding
    embed_page_text(std::string_view text) const;
    std::vector<float>
    word_row(std::string_view word) const;

private:
    std::vector<float>
    seeded_row(std::uint64_t seed) const;

    std::uint32_t dim_;
    std::uint32_t tokens_per_page_;
    std::uint64_t seed_;
};

/// Returns the question verbatim.
class EchoGenerator : public AnswerGenerator {
public:
    std::string
    identity() const override {
        return "echo-stub/1";
    }
    std::size_t
    max_pages() const override {
        return 4;
    }
    std::string
    generate(std::string_view question, std::span<const PageArtifact> pages) const override;
};

/// Reads each page's sidecar in rank order and returns the text after
/// "answer:" on the first page whose "keywords:" line shares a word with the
/// question; empty string when no page matches.
class KeywordStubGenerator : public AnswerGenerator {
public:
    explicit KeywordStubGenerator(std::size_t max_pages = 4) : max_pages_(max_pages) {
    }

    std::string
    identity() const override {
        return "keyword-stub/1";
    }
    std::size_t
    max_pages() const override {
        return max_pages_;
    }
    std::string
    generate(std::string_view question, std::span<const PageArtifact> pages) const override;

private:
    std::size_t max_pages_;
};

enum class DomainMode { kOpen, kClosed };

struct RetryPolicy {
    std::vector<std::chrono::milliseconds> backoff{std::chrono::milliseconds(1000),
                                                   std::chrono::milliseconds(4000)};
    std::function<void(std::chrono::milliseconds)> sleep;  // defaults to std::this_thread::sleep_for
};

struct PipelineConfig {
    IndexConfig index;
    std::size_t k = 4;
    std::size_t generator_pages = 4;
    DomainMode mode = DomainMode::kOpen;
    std::size_t workers = 1;
    SearchParams search;
    RetryPolicy retry;
};

/// Throws kConfig when generator_pages exceeds min(k, generator.max_pages).
void
validate_pipeline_config(const PipelineConfig& config, const AnswerGenerator& generator);

struct EmbedFailure {
    std::uint32_t global_id = 0;
    std::string message;
};

struct EmbedSummary {
    std::size_t embedded = 0;  // pages embedded by this run
    std::size_t reused = 0;    // pages taken from an existing store or checkpoint
    std::vector<EmbedFailure> failures;
    std::shared_ptr<const EmbeddingStore> store;  // set when every page is embedded
};

/// Embeds every manifest page into `store_path`. Image paths resolve
/// against `base_dir`. Pages already present in a store or checkpoint with
/// the same provider identity are reused. Unreadable pages are reported and
/// the run continues; the store is only written once complete, otherwise a
/// `<store>.partial` checkpoint is left behind.
EmbedSummary
embed_corpus(const CorpusManifest& manifest, const std::filesystem::path& base_dir,
             const EmbedderProvider& provider, const std::filesystem::path& store_path, std::size_t workers = 1);

PageArtifact
resolve_page(const CorpusManifest& manifest, const std::filesystem::path& base_dir, const PageRef& ref);

RetrievalResult
retrieve(const Query& query, const PageIndex& index, const PipelineConfig& config);

struct AnswerTrace {
    std::vector<PageRef> pages_used;
    std::vector<float> scores;
    std::string generator;
    double latency_ms = 0.0;
    std::size_t attempts = 0;
};

struct AnswerOutcome {
    std::string answer;
    AnswerTrace trace;
};

/// Carries the trace of a failed answer() call.
class GenerationError : public Error {
public:
    GenerationError(const std::string& message, AnswerTrace trace)
        : Error(ErrorKind::kTransport, message), trace_(std::move(trace)) {
    }
    const AnswerTrace&
    trace() const noexcept {
        return trace_;
    }

private:
    AnswerTrace trace_;
};

/// Passes the top generator_pages hits (rank order) and the question to the
/// generator; retries transport failures per config.retry.
AnswerOutcome
answer(const Query& query, const RetrievalResult& hits, const AnswerGenerator& generator,
       const PipelineConfig& config, const CorpusManifest& manifest, const std::filesystem::path& base_dir);

/// Everything a benchmark run needs. Non-owning.
struct Pipeline {
    const PageIndex* index = nullptr;
    const EmbedderProvider* embedder = nullptr;
    const AnswerGenerator* generator = nullptr;
    std::filesystem::path base_dir;
    PipelineConfig config;
};

/// Depths at which page recall is reported: 1, 2, 4 and k, capped at k.
std::vector<std::size_t>
recall_depths(std::size_t k);

/// Runs embed-query, retrieve and answer for every example. Per-example
/// failures are recorded and the run continues.
EvalReport
run_benchmark(const std::vector<QAExample>& examples, const Pipeline& pipeline,
              std::string config_json = "{}");

}  // namespace latepage
