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

#include "latepage/index.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "latepage/error.h"
#include "latepage/kmeans.h"
#include "latepage/scoring.h"

namespace latepage {

namespace {

constexpr std::uint64_t kSamplesPerCentroid = 256;

std::pair<std::uint32_t, std::uint32_t>
scope_range(const CorpusManifest& manifest, const Scope& scope) {
    if (const auto* closed = std::get_if<ClosedDomain>(&scope)) {
        const DocumentSpan& doc = manifest.document(closed->doc);
        return {doc.first_global_id, doc.end_global_id()};
    }
    return {0, static_cast<std::uint32_t>(manifest.page_count())};
}

std::uint32_t
argmax_ip(std::span<const float> dots) {
    std::uint32_t best = 0;
    for (std::uint32_t j = 1; j < dots.size(); ++j) {
        if (dots[j] > dots[best]) {
            best = j;
        }
    }
    return best;
}

}  // namespace

std::string_view
index_kind_name(IndexKind kind) {
    switch (kind) {
        case IndexKind::kFlat:
            return "flat";
        case IndexKind::kIvfFlat:
            return "ivfflat";
        case IndexKind::kIvfPq:
            return "ivfpq";
    }
    return "unknown";
}

IndexKind
parse_index_kind(std::string_view name) {
    if (name == "flat") {
        return IndexKind::kFlat;
    }
    if (name == "ivfflat") {
        return IndexKind::kIvfFlat;
    }
    if (name == "ivfpq") {
        return IndexKind::kIvfPq;
    }
    throw Error(ErrorKind::kConfig, "unknown index kind: " + std::string(name));
}

IndexConfig
resolve_defaults(IndexConfig config, std::uint64_t total_tokens, std::uint32_t dim) {
    if (config.kind == IndexKind::kFlat) {
        return config;
    }
    if (config.nlist == 0) {
        const auto root = static_cast<std::uint64_t>(std::ceil(std::sqrt(static_cast<double>(total_tokens))));
        config.nlist = static_cast<std::uint32_t>(std::clamp<std::uint64_t>(root, 1, std::max<std::uint64_t>(1, total_tokens)));
    }
    if (config.nprobe == 0) {
        config.nprobe = std::max<std::uint32_t>(1, (config.nlist + 15) / 16);
    }
    if (config.kind == IndexKind::kIvfPq && config.m == 0 && dim > 0) {
        std::uint32_t m = std::max<std::uint32_t>(1, dim / 4);
        while (dim % m != 0) {
            --m;
        }
        config.m = m;
    }
    return config;
}

std::uint32_t
default_candidate_pages(std::size_t k) {
    return static_cast<std::uint32_t>(std::max<std::size_t>(100, 10 * k));
}

void
validate_config(const IndexConfig& config, std::uint32_t dim) {
    if (config.kmeans.iters == 0) {
        throw Error(ErrorKind::kConfig, "kmeans iters must be >= 1");
    }
    if (config.kind == IndexKind::kFlat) {
        return;
    }
    if (config.nlist == 0) {
        throw Error(ErrorKind::kConfig, "nlist must be >= 1");
    }
    if (config.nprobe == 0 || config.nprobe > config.nlist) {
        throw Error(ErrorKind::kConfig, "nprobe must be in [1, nlist]; got nprobe=" +
                                            std::to_string(config.nprobe) + " nlist=" +
                                            std::to_string(config.nlist));
    }
    if (config.kind == IndexKind::kIvfPq) {
        if (config.m == 0 || dim % config.m != 0) {
            throw Error(ErrorKind::kConfig,
                        "m must divide d (d=" + std::to_string(dim) + ", m=" + std::to_string(config.m) + ")");
        }
        if (config.nbits < 1 || config.nbits > 8) {
            throw Error(ErrorKind::kConfig, "nbits must be in [1, 8]");
        }
    }
}

PageIndex
PageIndex::build(std::shared_ptr<const CorpusManifest> manifest, std::shared_ptr<const EmbeddingStore> store,
                 const IndexConfig& config) {
    check_store_matches(*manifest, *store);
    const std::uint64_t total = store->token_count();
    const std::uint32_t dim = store->dim();
    if (total > std::numeric_limits<std::uint32_t>::max()) {
        throw Error(ErrorKind::kConfig, "corpus has more than 2^32 token vectors");
    }
    IndexConfig cfg = resolve_defaults(config, total, dim);
    validate_config(cfg, dim);

    PageIndex index;
    index.manifest_ = std::move(manifest);
    index.store_ = std::move(store);
    index.config_ = cfg;
    index.store_crc_ = index.store_->payload_crc();
    if (cfg.kind == IndexKind::kFlat) {
        return index;
    }

    const EmbeddingStore& es = *index.store_;
    const std::uint64_t sample_count = std::min<std::uint64_t>(total, kSamplesPerCentroid * cfg.nlist);
    const auto sample_ids = sample_indices(total, sample_count, cfg.kmeans.seed);
    std::vector<float> sample(sample_count * dim);
    for (std::size_t i = 0; i < sample_ids.size(); ++i) {
        auto t = es.token(sample_ids[i]);
        std::copy(t.begin(), t.end(), sample.begin() + static_cast<std::ptrdiff_t>(i * dim));
    }
    if (cfg.nlist > sample_count) {
        throw Error(ErrorKind::kConfig, "nlist=" + std::to_string(cfg.nlist) + " exceeds the " +
                                            std::to_string(sample_count) + " available token vectors");
    }
    KMeansOptions km{cfg.nlist, cfg.kmeans.iters, cfg.kmeans.seed, cfg.kmeans.restarts};
    index.centroids_ = kmeans_train(sample, dim, km).centroids;
    transpose_into(EmbeddingView(index.centroids_.data(), cfg.nlist, dim), index.centroids_t_);

    std::vector<std::uint32_t> labels(total);
    std::vector<float> dots(cfg.nlist);
    index.lists_.assign(cfg.nlist, {});
    for (std::uint64_t v = 0; v < total; ++v) {
        dot_columns(es.token(v), index.centroids_t_.data(), cfg.nlist, cfg.nlist, dots.data());
        labels[v] = argmax_ip(dots);
        index.lists_[labels[v]].vector_ids.push_back(static_cast<std::uint32_t>(v));
    }

    std::vector<std::vector<std::uint8_t>> codes;
    if (cfg.kind == IndexKind::kIvfPq) {
        // The sample is already a seeded random draw, so its prefix is one too.
        const std::size_t pq_count =
            std::min<std::size_t>(sample_ids.size(), kSamplesPerCentroid * (std::size_t{1} << cfg.nbits));
        std::vector<float> residuals(pq_count * dim);
        for (std::size_t i = 0; i < pq_count; ++i) {
            const float* c = index.centroids_.data() + static_cast<std::size_t>(labels[sample_ids[i]]) * dim;
            for (std::uint32_t d = 0; d < dim; ++d) {
                residuals[i * dim + d] = sample[i * dim + d] - c[d];
            }
        }
        index.pq_ = ProductQuantizer(dim, cfg.m, cfg.nbits);
        index.pq_.train(residuals, km);

        codes.resize(cfg.nlist);
        std::vector<float> r(dim);
        for (std::uint32_t l = 0; l < cfg.nlist; ++l) {
            const auto& ids = index.lists_[l].vector_ids;
            codes[l].resize(ids.size() * cfg.m);
            const float* c = index.centroids_.data() + static_cast<std::size_t>(l) * dim;
            for (std::size_t j = 0; j < ids.size(); ++j) {
                auto t = es.token(ids[j]);
                for (std::uint32_t d = 0; d < dim; ++d) {
                    r[d] = t[d] - c[d];
                }
                index.pq_.encode(r, codes[l].data() + j * cfg.m);
            }
        }
        for (std::uint32_t l = 0; l < cfg.nlist; ++l) {
            auto& list = index.lists_[l];
            const std::size_t n = list.size();
            list.codes_t.resize(n * cfg.m);
            for (std::size_t j = 0; j < n; ++j) {
                for (std::uint32_t s = 0; s < cfg.m; ++s) {
                    list.codes_t[s * n + j] = codes[l][j * cfg.m + s];
                }
            }
        }
    }
    index.finish_lists();
    return index;
}

void
PageIndex::finish_lists() {
    const EmbeddingStore& es = *store_;
    const std::uint32_t tpp = es.tokens_per_page();
    const std::uint32_t dim = es.dim();
    for (auto& list : lists_) {
        const std::size_t n = list.size();
        list.page_ids.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            list.page_ids[j] = list.vector_ids[j] / tpp;
        }
        if (config_.kind == IndexKind::kIvfFlat) {
            list.vectors_t.resize(n * dim);
            for (std::size_t j = 0; j < n; ++j) {
                auto t = es.token(list.vector_ids[j]);
                for (std::uint32_t c = 0; c < dim; ++c) {
                    list.vectors_t[c * n + j] = t[c];
                }
            }
        }
    }
}

PageIndex
PageIndex::assemble(std::shared_ptr<const CorpusManifest> manifest, std::shared_ptr<const EmbeddingStore> store,
                    const IndexConfig& config, std::uint64_t store_crc, std::vector<float> centroids,
                    std::vector<std::vector<std::uint32_t>> list_ids, std::optional<ProductQuantizer> pq,
                    std::vector<std::vector<std::uint8_t>> list_codes) {
    check_store_matches(*manifest, *store);
    validate_config(config, store->dim());
    if (store->payload_crc() != store_crc) {
        throw Error(ErrorKind::kChecksumMismatch, "index was built over a different embedding store");
    }
    PageIndex index;
    index.manifest_ = std::move(manifest);
    index.store_ = std::move(store);
    index.config_ = config;
    index.store_crc_ = store_crc;
    if (config.kind == IndexKind::kFlat) {
        return index;
    }
    const std::uint32_t dim = index.store_->dim();
    if (centroids.size() != static_cast<std::size_t>(config.nlist) * dim || list_ids.size() != config.nlist) {
        throw Error(ErrorKind::kFormat, "index centroids/lists do not match nlist and dim");
    }
    const std::uint64_t total = index.store_->token_count();
    std::vector<std::uint8_t> seen(total, 0);
    std::uint64_t count = 0;
    for (const auto& ids : list_ids) {
        for (std::uint32_t v : ids) {
            if (v >= total || seen[v] != 0) {
                throw Error(ErrorKind::kFormat, "inverted lists are not a partition of the token vectors");
            }
            seen[v] = 1;
            ++count;
        }
    }
    if (count != total) {
        throw Error(ErrorKind::kFormat, "inverted lists do not cover every token vector");
    }
    index.centroids_ = std::move(centroids);
    transpose_into(EmbeddingView(index.centroids_.data(), config.nlist, dim), index.centroids_t_);
    index.lists_.resize(config.nlist);
    for (std::uint32_t l = 0; l < config.nlist; ++l) {
        index.lists_[l].vector_ids = std::move(list_ids[l]);
    }
    if (config.kind == IndexKind::kIvfPq) {
        if (!pq || pq->dim() != dim || pq->m() != config.m || pq->nbits() != config.nbits ||
            list_codes.size() != config.nlist) {
            throw Error(ErrorKind::kFormat, "IVFPQ index is missing a matching codebook or codes");
        }
        index.pq_ = std::move(*pq);
        for (std::uint32_t l = 0; l < config.nlist; ++l) {
            auto& list = index.lists_[l];
            const std::size_t n = list.size();
            if (list_codes[l].size() != n * config.m) {
                throw Error(ErrorKind::kFormat, "IVFPQ list " + std::to_string(l) + " has the wrong code size");
            }
            list.codes_t.resize(n * config.m);
            for (std::size_t j = 0; j < n; ++j) {
                for (std::uint32_t s = 0; s < config.m; ++s) {
                    list.codes_t[s * n + j] = list_codes[l][j * config.m + s];
                }
            }
        }
    }
    index.finish_lists();
    return index;
}

std::vector<std::uint8_t>
PageIndex::code(std::size_t list, std::size_t j) const {
    const auto& l = lists_.at(list);
    std::vector<std::uint8_t> out(pq_.m());
    for (std::size_t s = 0; s < pq_.m(); ++s) {
        out[s] = l.codes_t.at(s * l.size() + j);
    }
    return out;
}

std::vector<std::uint32_t>
PageIndex::probe(std::span<const float> centroid_dots, std::uint32_t nprobe) const {
    std::vector<std::uint32_t> order(centroid_dots.size());
    std::iota(order.begin(), order.end(), 0U);
    const auto keep = std::min<std::size_t>(nprobe, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                      [&](std::uint32_t a, std::uint32_t b) {
                          if (centroid_dots[a] != centroid_dots[b]) {
                              return centroid_dots[a] > centroid_dots[b];
                          }
                          return a < b;
                      });
    order.resize(keep);
    return order;
}

std::vector<Hit>
PageIndex::search_flat(EmbeddingView query, std::size_t k, std::uint32_t begin, std::uint32_t end) const {
    std::vector<Hit> hits;
    hits.reserve(end - begin);
    MaxSimScorer scorer;
    for (std::uint32_t g = begin; g < end; ++g) {
        hits.push_back({manifest_->page(g).ref, scorer.score(query, store_->page(g))});
    }
    return top_k(std::move(hits), k);
}

std::vector<Hit>
PageIndex::candidates(EmbeddingView query, const Scope& scope, std::uint32_t nprobe, std::size_t limit) const {
    if (config_.kind == IndexKind::kFlat) {
        throw Error(ErrorKind::kConfig, "flat index has no candidate phase");
    }
    if (query.dim() != dim()) {
        throw Error(ErrorKind::kDimensionMismatch, "query dim " + std::to_string(query.dim()) +
                                                       " does not match index dim " + std::to_string(dim()));
    }
    if (nprobe == 0 || nprobe > nlist()) {
        throw Error(ErrorKind::kConfig, "nprobe must be in [1, nlist]");
    }
    const auto [begin, end] = scope_range(*manifest_, scope);
    const std::size_t pages = store_->page_count();
    const std::size_t nl = nlist();
    const float unset = -std::numeric_limits<float>::infinity();

    const std::size_t rows = query.rows();
    const bool pq = config_.kind == IndexKind::kIvfPq;
    std::vector<float> table;
    if (pq) {
        table.resize(rows * pq_.m() * pq_.ksub());
    }

    // Probe lists per row, then visit each list once for every row that
    // probed it so its vectors are read from memory once per query.
    std::vector<float> cdots(rows * nl);
    std::vector<std::vector<std::uint32_t>> probing(nl);
    for (std::size_t i = 0; i < rows; ++i) {
        auto q = query.row(i);
        float* cd = cdots.data() + i * nl;
        dot_columns(q, centroids_t_.data(), nl, nl, cd);
        if (pq) {
            pq_.compute_ip_table(q, table.data() + i * pq_.m() * pq_.ksub());
        }
        for (std::uint32_t l : probe(std::span<const float>(cd, nl), nprobe)) {
            probing[l].push_back(static_cast<std::uint32_t>(i));
        }
    }

    std::vector<float> row_best(rows * pages, unset);
    std::vector<std::vector<std::uint32_t>> touched(rows);
    std::vector<float> buf;
    for (std::size_t l = 0; l < nl; ++l) {
        const InvertedList& list = lists_[l];
        const std::size_t n = list.size();
        if (n == 0 || probing[l].empty()) {
            continue;
        }
        buf.resize(n);
        for (std::uint32_t i : probing[l]) {
            if (pq) {
                std::fill(buf.begin(), buf.end(), 0.0F);
                const std::size_t ksub = pq_.ksub();
                for (std::size_t s = 0; s < pq_.m(); ++s) {
                    const std::uint8_t* codes = list.codes_t.data() + s * n;
                    const float* t = table.data() + (i * pq_.m() + s) * ksub;
                    for (std::size_t j = 0; j < n; ++j) {
                        buf[j] += t[codes[j]];
                    }
                }
                const float base = cdots[i * nl + l];
                for (std::size_t j = 0; j < n; ++j) {
                    buf[j] = base + buf[j];
                }
            } else {
                dot_columns(query.row(i), list.vectors_t.data(), n, n, buf.data());
            }
            float* best = row_best.data() + static_cast<std::size_t>(i) * pages;
            auto& hit = touched[i];
            for (std::size_t j = 0; j < n; ++j) {
                const std::uint32_t p = list.page_ids[j];
                if (p < begin || p >= end) {
                    continue;
                }
                if (buf[j] > best[p]) {
                    if (best[p] == unset) {
                        hit.push_back(p);
                    }
                    best[p] = buf[j];
                }
            }
        }
    }

    // Sum in query-row order. A row that hit nothing on a page contributes 0.
    std::vector<float> page_sum(pages, 0.0F);
    std::vector<std::uint8_t> seen(pages, 0);
    std::vector<std::uint32_t> pool;
    for (std::size_t i = 0; i < rows; ++i) {
        const float* best = row_best.data() + i * pages;
        for (std::uint32_t p : touched[i]) {
            if (seen[p] == 0) {
                seen[p] = 1;
                pool.push_back(p);
            }
            page_sum[p] += best[p];
        }
    }

    std::vector<Hit> hits;
    hits.reserve(pool.size());
    for (std::uint32_t p : pool) {
        hits.push_back({manifest_->page(p).ref, page_sum[p]});
    }
    if (hits.empty() || limit == 0) {
        return {};
    }
    return top_k(std::move(hits), limit);
}

std::vector<Hit>
PageIndex::search(EmbeddingView query, std::size_t k, const Scope& scope, const SearchParams& params) const {
    if (k == 0) {
        throw Error(ErrorKind::kInvalidArgument, "search requires k >= 1");
    }
    if (query.dim() != dim()) {
        throw Error(ErrorKind::kDimensionMismatch, "query dim " + std::to_string(query.dim()) +
                                                       " does not match index dim " + std::to_string(dim()));
    }
    const auto [begin, end] = scope_range(*manifest_, scope);
    if (config_.kind == IndexKind::kFlat) {
        return search_flat(query, k, begin, end);
    }
    const std::uint32_t nprobe = params.nprobe.value_or(config_.nprobe);
    std::uint32_t pool = params.candidate_pages.value_or(config_.candidate_pages);
    if (pool == 0) {
        pool = default_candidate_pages(k);
    }
    // A pool covering the whole scope cannot truncate the result.
    if (pool < k && pool < end - begin) {
        throw Error(ErrorKind::kConfig, "candidate_pages=" + std::to_string(pool) + " is smaller than k=" +
                                            std::to_string(k));
    }
    std::vector<Hit> cands = candidates(query, scope, nprobe, pool);
    MaxSimScorer scorer;
    for (Hit& h : cands) {
        h.score = scorer.score(query, store_->page(h.page.global_id));
    }
    if (cands.empty()) {
        return {};
    }
    return top_k(std::move(cands), k);
}

RetrievalResult
PageIndex::search(const Query& query, std::size_t k, const SearchParams& params) const {
    return {query.id, search(query.embedding.view(), k, query.scope, params)};
}

}  // namespace latepage
