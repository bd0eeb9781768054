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
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "latepage/core.h"
#include "latepage/embedding_store.h"
#include "latepage/pq.h"

namespace latepage {

enum class IndexKind : std::uint32_t { kFlat = 0, kIvfFlat = 1, kIvfPq = 2 };

std::string_view
index_kind_name(IndexKind kind);
IndexKind
parse_index_kind(std::string_view name);

struct KMeansConfig {
    std::uint32_t iters = 20;
    std::uint64_t seed = 1234;
    std::uint32_t restarts = 1;

    bool operator==(const KMeansConfig&) const = default;
};

/// Zero in nlist / nprobe / m / candidate_pages selects the size-dependent
/// default (see resolve_defaults and default_candidate_pages).
struct IndexConfig {
    IndexKind kind = IndexKind::kFlat;
    std::uint32_t nlist = 0;
    std::uint32_t nprobe = 0;
    std::uint32_t m = 0;
    std::uint32_t nbits = 8;
    std::uint32_t candidate_pages = 0;
    KMeansConfig kmeans;

    bool operator==(const IndexConfig&) const = default;
};

/// nlist = ceil(sqrt(tokens)), nprobe = ceil(nlist / 16), m = dim / 4.
IndexConfig
resolve_defaults(IndexConfig config, std::uint64_t total_tokens, std::uint32_t dim);

/// max(100, 10 k)
std::uint32_t
default_candidate_pages(std::size_t k);

/// Throws kConfig on any violated invariant (nprobe <= nlist, m | d, ...).
void
validate_config(const IndexConfig& config, std::uint32_t dim);

/// Decomposition of a flattened token id.
struct TokenEntry {
    std::uint64_t vector_id = 0;
    std::uint32_t page_global_id = 0;
    std::uint32_t row_index = 0;

    static TokenEntry
    from_vector_id(std::uint64_t vector_id, std::uint32_t tokens_per_page) {
        return {vector_id, static_cast<std::uint32_t>(vector_id / tokens_per_page),
                static_cast<std::uint32_t>(vector_id % tokens_per_page)};
    }
};

struct InvertedList {
    std::vector<std::uint32_t> vector_ids;  // ascending
    std::vector<std::uint32_t> page_ids;    // vector_id / tokens_per_page
    std::vector<float> vectors_t;           // IVFFlat: dim x size, column-major
    std::vector<std::uint8_t> codes_t;      // IVFPQ: m x size, column-major

    std::size_t
    size() const noexcept {
        return vector_ids.size();
    }
};

/// Per-call knobs. Unset values fall back to the index config.
struct SearchParams {
    std::optional<std::uint32_t> nprobe;
    std::optional<std::uint32_t> candidate_pages;
};

/// Searchable structure over every token vector of a corpus. Flat scores
/// every page exactly; IVFFlat / IVFPQ probe inverted lists per query row to
/// collect candidate pages, then rerank them with exact MaxSim against the
/// attached store. Immutable once built; search is safe to call concurrently.
class PageIndex {
public:
    static PageIndex
    build(std::shared_ptr<const CorpusManifest> manifest, std::shared_ptr<const EmbeddingStore> store,
          const IndexConfig& config);

    RetrievalResult
    search(const Query& query, std::size_t k, const SearchParams& params = {}) const;
    std::vector<Hit>
    search(EmbeddingView query, std::size_t k, const Scope& scope, const SearchParams& params = {}) const;

    /// Candidate generation only (approximate kinds): pages ranked by the
    /// summed per-row best token hit, before rerank.
    std::vector<Hit>
    candidates(EmbeddingView query, const Scope& scope, std::uint32_t nprobe, std::size_t limit) const;

    IndexKind
    kind() const noexcept {
        return config_.kind;
    }
    const IndexConfig&
    config() const noexcept {
        return config_;
    }
    std::uint32_t
    dim() const noexcept {
        return store_->dim();
    }
    const CorpusManifest&
    manifest() const noexcept {
        return *manifest_;
    }
    const EmbeddingStore&
    store() const noexcept {
        return *store_;
    }
    std::uint64_t
    store_crc() const noexcept {
        return store_crc_;
    }

    std::size_t
    nlist() const noexcept {
        return lists_.size();
    }
    const std::vector<float>&
    centroids() const noexcept {
        return centroids_;
    }
    const std::vector<InvertedList>&
    lists() const noexcept {
        return lists_;
    }
    const ProductQuantizer&
    pq() const noexcept {
        return pq_;
    }
    /// m-byte code of the j-th entry of list l (IVFPQ only).
    std::vector<std::uint8_t>
    code(std::size_t list, std::size_t j) const;

    /// Reassembles an index from persisted parts; validates every invariant
    /// against the attached corpus. Used by the storage module.
    static PageIndex
    assemble(std::shared_ptr<const CorpusManifest> manifest, std::shared_ptr<const EmbeddingStore> store,
             const IndexConfig& config, std::uint64_t store_crc, std::vector<float> centroids,
             std::vector<std::vector<std::uint32_t>> list_ids, std::optional<ProductQuantizer> pq,
             std::vector<std::vector<std::uint8_t>> list_codes);

private:
    PageIndex() = default;

    void
    finish_lists();
    std::vector<std::uint32_t>
    probe(std::span<const float> centroid_dots, std::uint32_t nprobe) const;
    std::vector<Hit>
    search_flat(EmbeddingView query, std::size_t k, std::uint32_t begin, std::uint32_t end) const;

    std::shared_ptr<const CorpusManifest> manifest_;
    std::shared_ptr<const EmbeddingStore> store_;
    IndexConfig config_;
    std::uint64_t store_crc_ = 0;
    std::vector<float> centroids_;    // nlist x dim
    std::vector<float> centroids_t_;  // dim x nlist
    std::vector<InvertedList> lists_;
    ProductQuantizer pq_;
};

}  // namespace latepage
