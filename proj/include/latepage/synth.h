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
#include <vector>

#include "latepage/core.h"
#include "latepage/embedding_store.h"

namespace latepage {

// Synthetic corpora for benchmarks and randomized tests. Deterministic for a
// fixed seed on a given standard library.

struct SyntheticCorpus {
    std::shared_ptr<const CorpusManifest> manifest;
    std::shared_ptr<const EmbeddingStore> store;
};

/// Corpus identity only: documents "d0000", "d0001", ... of pages_per_doc
/// pages (the last one possibly shorter).
CorpusManifest
make_synthetic_manifest(std::uint32_t pages, std::uint32_t pages_per_doc, std::uint32_t dim,
                        std::uint32_t tokens_per_page);

/// Pages whose rows are i.i.d. standard normal (not normalized).
SyntheticCorpus
make_gaussian_corpus(std::uint32_t pages, std::uint32_t tokens_per_page, std::uint32_t dim, std::uint64_t seed,
                     std::uint32_t pages_per_doc = 10);

struct MixtureSpec {
    std::uint32_t pages = 1000;
    std::uint32_t tokens_per_page = 16;
    std::uint32_t dim = 64;
    std::uint32_t clusters = 64;
    std::uint32_t topics_per_page = 4;  // clusters a page draws its tokens from
    float spread = 0.35F;               // noise norm relative to the unit cluster center
    std::uint32_t pages_per_doc = 10;
    std::uint64_t seed = 1;
};

/// Unit-norm token vectors drawn around unit-norm cluster centers.
SyntheticCorpus
make_mixture_corpus(const MixtureSpec& spec);

/// Queries built from perturbed copies of rows of randomly chosen pages.
std::vector<MultiVecEmbedding>
make_page_queries(const EmbeddingStore& store, std::size_t count, std::uint32_t rows, float noise,
                  std::uint64_t seed);

MultiVecEmbedding
random_gaussian_embedding(std::size_t rows, std::size_t dim, std::uint64_t seed);

}  // namespace latepage
