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

#include "support.h"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <random>
#include <stdexcept>
#include <unistd.h>

#include "latepage/kmeans.h"
#include "latepage/storage.h"
#include "latepage/synth.h"

namespace latepage::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("latepage-" + tag + "-" + std::to_string(::getpid()) + "-" +
                                         std::to_string(counter++) + "-" + std::to_string(rd() % 100000));
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

float
oracle_maxsim(EmbeddingView query, EmbeddingView page) {
    const std::size_t d = query.dim();
    if (page.dim() != d) {
        throw std::invalid_argument("oracle_maxsim: dim mismatch");
    }
    float total = 0.0F;
    for (std::size_t i = 0; i < query.rows(); ++i) {
        const float* q = query.data() + i * d;
        float best = 0.0F;
        for (std::size_t j = 0; j < page.rows(); ++j) {
            const float* p = page.data() + j * d;
            float dot = 0.0F;
            for (std::size_t c = 0; c < d; ++c) {
                dot += q[c] * p[c];
            }
            if (j == 0 || dot > best) {
                best = dot;
            }
        }
        total += best;
    }
    return total;
}

std::vector<std::pair<std::uint32_t, float>>
oracle_rank(EmbeddingView query, const EmbeddingStore& store, std::uint32_t begin, std::uint32_t end,
            std::size_t k) {
    std::vector<std::pair<std::uint32_t, float>> all;
    for (std::uint32_t g = begin; g < end; ++g) {
        all.emplace_back(g, oracle_maxsim(query, store.page(g)));
    }
    std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) {
            return a.second > b.second;
        }
        return a.first < b.first;
    });
    if (all.size() > k) {
        all.resize(k);
    }
    return all;
}

std::string
planted_keyword(std::uint32_t global_id) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "kw%04u", global_id);
    return buf;
}

std::string
planted_answer(std::uint32_t global_id) {
    static const char* const kNames[] = {"Orion", "Vega",   "Lyra",  "Draco",  "Cetus",  "Hydra",
                                         "Pavo",  "Lepus",  "Corvus", "Aquila", "Carina", "Tucana"};
    return std::string(kNames[global_id % 12]) + " " + std::to_string(global_id);
}

PlantedSuite
make_planted_suite(const fs::path& dir, const PlantedSpec& spec) {
    PlantedSuite suite;
    suite.dir = dir;
    fs::create_directories(dir / "pages");

    CorpusManifest manifest = make_synthetic_manifest(spec.docs * spec.pages_per_doc, spec.pages_per_doc, spec.dim,
                                                      spec.tokens_per_page);
    manifest.corpus_id = "planted";
    for (std::uint32_t g = 0; g < manifest.page_count(); ++g) {
        const PageRef& ref = manifest.page(g).ref;
        const std::string image = "pages/" + ref.doc.str() + "_" + std::to_string(ref.page_index) + ".png";
        manifest.set_image_path(g, image);
        std::ofstream(dir / image, std::ios::binary) << "placeholder " << g;
        std::ofstream(sidecar_path(dir / image)) << "keywords: " << planted_keyword(g) << "\n"
                                                 << "answer: " << planted_answer(g) << "\n"
                                                 << "which entity is tagged " << planted_keyword(g)
                                                 << " in section " << ref.doc.str() << " part "
                                                 << ref.page_index << "\n";
    }
    write_manifest(dir / "manifest.json", manifest);
    suite.manifest = std::make_shared<const CorpusManifest>(manifest);

    const auto picks = sample_indices(manifest.page_count(), spec.questions, spec.seed);
    for (std::size_t i = 0; i < picks.size(); ++i) {
        const auto g = static_cast<std::uint32_t>(picks[i]);
        const PageRef& ref = manifest.page(g).ref;
        QAExample ex;
        char id[16];
        std::snprintf(id, sizeof(id), "p%03zu", i);
        ex.id = id;
        ex.question = "Which entity is tagged " + planted_keyword(g) + "?";
        ex.gold_answers = {planted_answer(g)};
        ex.hops = i % 5 == 4 ? Hops::kMulti : Hops::kSingle;
        ex.modalities = {kAllModalities[i % std::size(kAllModalities)]};
        ex.gold_pages = std::vector<PageKey>{{ref.doc, ref.page_index}};
        ex.doc = ref.doc;
        suite.examples.push_back(std::move(ex));
        suite.gold_global_ids.push_back(g);
    }
    write_examples(dir / "examples.jsonl", suite.examples);

    suite.embedder = std::make_unique<MockEmbedder>(spec.dim, spec.tokens_per_page, spec.seed);
    EmbedSummary s = embed_corpus(manifest, dir, *suite.embedder, dir / "embeddings.m3e");
    if (!s.store) {
        throw std::runtime_error("planted corpus embedding incomplete");
    }
    suite.store = s.store;
    return suite;
}

}  // namespace latepage::testing
