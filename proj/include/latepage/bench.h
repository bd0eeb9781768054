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
#include <string>
#include <vector>

#include "latepage/index.h"

namespace latepage {

struct BenchSpec {
    std::uint64_t tokens = 1'000'000;     // target N * tokens_per_page
    std::uint32_t tokens_per_page = 32;
    std::uint32_t dim = 64;
    std::uint32_t clusters = 256;
    std::uint32_t query_rows = 16;
    std::size_t queries = 20;
    std::size_t warmup = 3;
    std::size_t k = 10;
    std::uint64_t seed = 7;
    std::vector<IndexKind> kinds{IndexKind::kFlat, IndexKind::kIvfFlat, IndexKind::kIvfPq};
    IndexConfig base;  // nlist / nprobe / m / nbits / kmeans shared by the IVF kinds
};

struct BenchRun {
    IndexConfig config;  // resolved
    std::uint64_t pages = 0;
    std::uint64_t tokens = 0;
    double build_ms = 0.0;
    double p50_ms = 0.0;
    double p95_ms = 0.0;
    double recall_at_k = 0.0;  // overlap with exact top-k, averaged over queries
    std::size_t k = 0;
};

/// Builds one index per kind over a Gaussian-mixture corpus and times
/// `queries` searches after `warmup` untimed ones. Exact results come from a
/// Flat index over the same corpus.
std::vector<BenchRun>
run_bench(const BenchSpec& spec);

/// {config, N, tokens, build_ms, per_query_ms: {p50, p95}, recall_at_k_vs_exact}
std::string
bench_run_to_json(const BenchRun& run);

}  // namespace latepage
