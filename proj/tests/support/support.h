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

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "latepage/core.h"
#include "latepage/embedding_store.h"
#include "latepage/pipeline.h"

namespace latepage::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "t");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir&
    operator=(const TempDir&) = delete;

    const std::filesystem::path&
    path() const {
        return path_;
    }

private:
    std::filesystem::path path_;
};

/// Brute-force MaxSim written without the library kernels: per query row,
/// the max over page rows of a plain ascending-coordinate float dot product,
/// summed in query-row order.
float
oracle_maxsim(EmbeddingView query, EmbeddingView page);

/// Exact ranking by the oracle: descending score, ties by ascending global id.
std::vector<std::pair<std::uint32_t, float>>
oracle_rank(EmbeddingView query, const EmbeddingStore& store, std::uint32_t begin, std::uint32_t end,
            std::size_t k);

/// Planted question-answering corpus. Every page carries a unique keyword
/// "kwNNNN" (its global id) and an answer string in its sidecar. All pages
/// also contain the question template words, so a query's only
/// discriminating row is its keyword, which matches exactly one page row.
struct PlantedSuite {
    std::filesystem::path dir;
    std::shared_ptr<const CorpusManifest> manifest;
    std::shared_ptr<const EmbeddingStore> store;
    std::vector<QAExample> examples;
    std::vector<std::uint32_t> gold_global_ids;  // per example
    std::unique_ptr<MockEmbedder> embedder;
};

struct PlantedSpec {
    std::uint32_t docs = 20;
    std::uint32_t pages_per_doc = 10;
    std::uint32_t questions = 50;
    std::uint32_t dim = 64;
    std::uint32_t tokens_per_page = 16;
    std::uint64_t seed = 11;
};

/// Writes manifest.json, page sidecars, examples.jsonl and embeddings.m3e
/// under `dir` and returns the loaded suite.
PlantedSuite
make_planted_suite(const std::filesystem::path& dir, const PlantedSpec& spec = {});

std::string
planted_keyword(std::uint32_t global_id);
std::string
planted_answer(std::uint32_t global_id);

}  // namespace latepage::testing
