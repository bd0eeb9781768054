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

#include "latepage/synth.h"

#include <cmath>
#include <random>
#include <string>

namespace latepage {

namespace {

void
normalize(float* v, std::size_t dim) {
    double norm = 0.0;
    for (std::size_t c = 0; c < dim; ++c) {
        norm += static_cast<double>(v[c]) * v[c];
    }
    if (norm == 0.0) {
        v[0] = 1.0F;
        return;
    }
    const double inv = 1.0 / std::sqrt(norm);
    for (std::size_t c = 0; c < dim; ++c) {
        v[c] = static_cast<float>(v[c] * inv);
    }
}

}  // namespace

CorpusManifest
make_synthetic_manifest(std::uint32_t pages, std::uint32_t pages_per_doc, std::uint32_t dim,
                        std::uint32_t tokens_per_page) {
    std::vector<std::pair<DocumentId, std::uint32_t>> docs;
    char name[32];
    for (std::uint32_t first = 0, d = 0; first < pages; first += pages_per_doc, ++d) {
        std::snprintf(name, sizeof(name), "d%04u", d);
        docs.emplace_back(DocumentId(name), std::min(pages_per_doc, pages - first));
    }
    CorpusManifest m = flatten_corpus(docs);
    m.corpus_id = "synthetic";
    m.dim = dim;
    m.tokens_per_page = tokens_per_page;
    m.page_width_px = 1224;
    m.page_height_px = 1584;
    for (std::uint32_t g = 0; g < pages; ++g) {
        const auto& ref = m.page(g).ref;
        m.set_image_path(g, "pages/" + ref.doc.str() + "_" + std::to_string(ref.page_index) + ".png");
    }
    return m;
}

SyntheticCorpus
make_gaussian_corpus(std::uint32_t pages, std::uint32_t tokens_per_page, std::uint32_t dim, std::uint64_t seed,
                     std::uint32_t pages_per_doc) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> normal(0.0F, 1.0F);
    std::vector<float> data(static_cast<std::size_t>(pages) * tokens_per_page * dim);
    for (auto& v : data) {
        v = normal(rng);
    }
    return {std::make_shared<const CorpusManifest>(make_synthetic_manifest(pages, pages_per_doc, dim, tokens_per_page)),
            std::make_shared<const EmbeddingStore>(dim, tokens_per_page, pages, "synthetic-gaussian",
                                                   std::move(data))};
}

SyntheticCorpus
make_mixture_corpus(const MixtureSpec& spec) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<float> normal(0.0F, 1.0F);
    const std::size_t dim = spec.dim;
    std::vector<float> centers(static_cast<std::size_t>(spec.clusters) * dim);
    for (std::uint32_t c = 0; c < spec.clusters; ++c) {
        for (std::size_t i = 0; i < dim; ++i) {
            centers[c * dim + i] = normal(rng);
        }
        normalize(centers.data() + c * dim, dim);
    }
    const float scale = spec.spread / std::sqrt(static_cast<float>(dim));
    std::vector<float> data(static_cast<std::size_t>(spec.pages) * spec.tokens_per_page * dim);
    std::vector<std::uint32_t> topics(spec.topics_per_page);
    float* out = data.data();
    for (std::uint32_t p = 0; p < spec.pages; ++p) {
        for (auto& t : topics) {
            t = static_cast<std::uint32_t>(rng() % spec.clusters);
        }
        for (std::uint32_t r = 0; r < spec.tokens_per_page; ++r, out += dim) {
            const float* center = centers.data() + topics[rng() % topics.size()] * dim;
            for (std::size_t i = 0; i < dim; ++i) {
                out[i] = center[i] + scale * normal(rng);
            }
            normalize(out, dim);
        }
    }
    return {std::make_shared<const CorpusManifest>(
                make_synthetic_manifest(spec.pages, spec.pages_per_doc, spec.dim, spec.tokens_per_page)),
            std::make_shared<const EmbeddingStore>(spec.dim, spec.tokens_per_page, spec.pages, "synthetic-mixture",
                                                   std::move(data))};
}

std::vector<MultiVecEmbedding>
make_page_queries(const EmbeddingStore& store, std::size_t count, std::uint32_t rows, float noise,
                  std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> normal(0.0F, 1.0F);
    const std::size_t dim = store.dim();
    const float scale = noise / std::sqrt(static_cast<float>(dim));
    std::vector<MultiVecEmbedding> out;
    out.reserve(count);
    for (std::size_t q = 0; q < count; ++q) {
        const std::uint64_t page = rng() % store.page_count();
        std::vector<float> data(static_cast<std::size_t>(rows) * dim);
        for (std::uint32_t r = 0; r < rows; ++r) {
            const auto src = store.page(page).row(rng() % store.tokens_per_page());
            float* dst = data.data() + r * dim;
            for (std::size_t i = 0; i < dim; ++i) {
                dst[i] = src[i] + scale * normal(rng);
            }
            normalize(dst, dim);
        }
        out.emplace_back(rows, dim, std::move(data));
    }
    return out;
}

MultiVecEmbedding
random_gaussian_embedding(std::size_t rows, std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> normal(0.0F, 1.0F);
    std::vector<float> data(rows * dim);
    for (auto& v : data) {
        v = normal(rng);
    }
    return {rows, dim, std::move(data)};
}

}  // namespace latepage
