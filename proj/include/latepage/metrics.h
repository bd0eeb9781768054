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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "latepage/core.h"

namespace latepage {

/// SQuAD-style answer normalization: lowercase, drop ASCII punctuation,
/// drop the articles "a", "an", "the" as whole words, collapse whitespace.
std::string
normalize_answer(std::string_view s);

/// 1 iff the normalized prediction equals some normalized gold answer.
int
exact_match(std::string_view pred, const std::vector<std::string>& golds);

/// Bag-of-tokens F1 on normalized strings, max over golds. Two empty token
/// lists score 1; exactly one empty side scores 0.
double
token_f1(std::string_view pred, const std::vector<std::string>& golds);

/// Edit distance over Unicode code points (UTF-8 input; invalid bytes count
/// as one code point each).
std::size_t
levenshtein(std::string_view a, std::string_view b);

inline constexpr double kAnlsThreshold = 0.5;

/// Normalized Levenshtein similarity of the lowercased, trimmed strings,
/// zeroed below tau, max over golds.
double
anls(std::string_view pred, const std::vector<std::string>& golds, double tau = kAnlsThreshold);

/// Fraction of gold pages among the first k hits. Throws on empty golds.
double
recall_at_k(const std::vector<Hit>& hits, const std::vector<std::uint32_t>& gold_global_ids, std::size_t k);

/// Nearest-rank percentile (p in (0, 100]); 0 for an empty sample.
double
percentile_nearest_rank(std::vector<double> values, double p);

struct LatencyStats {
    double p50 = 0.0;
    double p95 = 0.0;
};

LatencyStats
latency_stats(const std::vector<double>& samples);

/// Outcome of one QA example.
struct ExampleRecord {
    std::string id;
    std::string question;
    Hops hops = Hops::kSingle;
    std::vector<Modality> modalities;
    std::string answer;
    int em = 0;
    double f1 = 0.0;
    double anls = 0.0;
    std::vector<Hit> hits;
    std::vector<PageRef> pages_used;
    std::map<std::size_t, double> recall_at_k;  // only when gold pages are known
    std::string generator;
    double retrieval_ms = 0.0;
    double generation_ms = 0.0;
    std::optional<std::string> error;  // set when the example failed
};

struct MetricAggregate {
    std::size_t count = 0;   // non-failed examples
    std::size_t failed = 0;
    double em = 0.0;
    double f1 = 0.0;
    double anls = 0.0;
    std::size_t recall_count = 0;
    std::map<std::size_t, double> recall_at_k;
};

struct EvalReport {
    std::string config_json = "{}";  // effective configuration, echoed verbatim
    std::vector<ExampleRecord> records;  // sorted by id
    MetricAggregate overall;
    std::map<std::string, MetricAggregate> by_hops;
    std::map<std::string, MetricAggregate> by_modality;
    LatencyStats retrieval_latency;
    LatencyStats generation_latency;
};

/// Means over non-failed records; failures are counted separately. Records
/// are re-sorted by id so the result does not depend on completion order.
EvalReport
build_report(std::vector<ExampleRecord> records, std::string config_json = "{}");

/// Stable field order. Latency fields are omitted when include_latency is
/// false, which makes reports from identical runs byte-identical.
std::string
report_to_json(const EvalReport& report, bool include_latency = true);

/// Text table with one column per evidence modality present, per hop type
/// and overall; rows EM / F1 / ANLS in percent plus example counts.
std::string
render_table(const EvalReport& report);

}  // namespace latepage
