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

#include "latepage/bench.h"

#include <algorithm>
#include <chrono>
#include <set>

#include <nlohmann/json.hpp>

#include "latepage/metrics.h"
#include "latepage/synth.h"

namespace latepage {

namespace {

using Clock = std::chrono::steady_clock;

double
ms_since(Clock::time_point t) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t).count();
}

}  // namespace

std::vector<BenchRun>
run_bench(const BenchSpec& spec) {
    MixtureSpec mix;
    mix.tokens_per_page = spec.tokens_per_page;
    mix.pages = static_cast<std::uint32_t>(std::max<std::uint64_t>(1, spec.tokens / spec.tokens_per_page));
    mix.dim = spec.dim;
    mix.clusters = spec.clusters;
    mix.seed = spec.seed;
    const SyntheticCorpus corpus = make_mixture_corpus(mix);
    const auto queries =
        make_page_queries(*corpus.store, spec.warmup + spec.queries, spec.query_rows, 0.2F, spec.seed + 1);

    IndexConfig flat_cfg;
    const PageIndex exact_index = PageIndex::build(corpus.manifest, corpus.store, flat_cfg);
    std::vector<std::vector<Hit>> exact;
    exact.reserve(queries.size());
    for (const auto& q : queries) {
        exact.push_back(exact_index.search(q.view(), spec.k, OpenDomain{}));
    }

    std::vector<BenchRun> runs;
    for (IndexKind kind : spec.kinds) {
        IndexConfig cfg = spec.base;
        cfg.kind = kind;
        const auto t0 = Clock::now();
        const PageIndex index = PageIndex::build(corpus.manifest, corpus.store, cfg);
        BenchRun run;
        run.build_ms = ms_since(t0);
        run.config = index.config();
        run.pages = corpus.store->page_count();
        run.tokens = corpus.store->token_count();
        run.k = spec.k;

        std::vector<double> times;
        double recall = 0.0;
        for (std::size_t i = 0; i < queries.size(); ++i) {
            const auto t = Clock::now();
            const auto hits = index.search(queries[i].view(), spec.k, OpenDomain{});
            const double ms = ms_since(t);
            if (i < spec.warmup) {
                continue;
            }
            times.push_back(ms);
            std::set<std::uint32_t> want;
            for (const auto& h : exact[i]) {
                want.insert(h.page.global_id);
            }
            std::size_t found = 0;
            for (const auto& h : hits) {
                found += want.count(h.page.global_id);
            }
            recall += want.empty() ? 1.0 : static_cast<double>(found) / static_cast<double>(want.size());
        }
        const LatencyStats stats = latency_stats(times);
        run.p50_ms = stats.p50;
        run.p95_ms = stats.p95;
        run.recall_at_k = times.empty() ? 0.0 : recall / static_cast<double>(times.size());
        runs.push_back(run);
    }
    return runs;
}

std::string
bench_run_to_json(const BenchRun& run) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json cfg;
    cfg["kind"] = std::string(index_kind_name(run.config.kind));
    if (run.config.kind != IndexKind::kFlat) {
        cfg["nlist"] = run.config.nlist;
        cfg["nprobe"] = run.config.nprobe;
        cfg["candidate_pages"] =
            run.config.candidate_pages != 0 ? run.config.candidate_pages : default_candidate_pages(run.k);
    }
    if (run.config.kind == IndexKind::kIvfPq) {
        cfg["m"] = run.config.m;
        cfg["nbits"] = run.config.nbits;
    }
    cfg["k"] = run.k;
    j["config"] = std::move(cfg);
    j["N"] = run.pages;
    j["tokens"] = run.tokens;
    j["build_ms"] = run.build_ms;
    j["per_query_ms"] = {{"p50", run.p50_ms}, {"p95", run.p95_ms}};
    j["recall_at_k_vs_exact"] = run.recall_at_k;
    return j.dump();
}

}  // namespace latepage
