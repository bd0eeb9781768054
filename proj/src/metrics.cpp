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

#include "latepage/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "latepage/error.h"

namespace latepage {

namespace {

using json = nlohmann::ordered_json;

bool
is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool
is_punct(char c) {
    const auto u = static_cast<unsigned char>(c);
    return u < 0x80 && std::ispunct(u) != 0;
}

char
lower(char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

std::vector<std::string>
split_ws(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(s[i])) {
            ++i;
        }
        std::size_t j = i;
        while (j < s.size() && !is_space(s[j])) {
            ++j;
        }
        if (j > i) {
            out.emplace_back(s.substr(i, j - i));
        }
        i = j;
    }
    return out;
}

std::u32string
decode_utf8(std::string_view s) {
    std::u32string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        const auto b0 = static_cast<unsigned char>(s[i]);
        int extra = 0;
        char32_t cp = b0;
        if (b0 >= 0xF0 && b0 < 0xF8) {
            extra = 3;
            cp = b0 & 0x07;
        } else if (b0 >= 0xE0) {
            extra = 2;
            cp = b0 & 0x0F;
        } else if (b0 >= 0xC0) {
            extra = 1;
            cp = b0 & 0x1F;
        }
        if (b0 >= 0xF8 || (b0 >= 0x80 && b0 < 0xC0) || (extra > 0 && i + extra >= s.size())) {
            extra = 0;
            cp = b0;
        }
        bool valid = true;
        for (int k = 1; k <= extra; ++k) {
            const auto bk = static_cast<unsigned char>(s[i + k]);
            if ((bk & 0xC0) != 0x80) {
                valid = false;
                break;
            }
            cp = (cp << 6) | (bk & 0x3F);
        }
        if (!valid) {
            extra = 0;
            cp = b0;
        }
        out.push_back(cp);
        i += 1 + extra;
    }
    return out;
}

std::string
anls_prepare(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) {
        ++b;
    }
    while (e > b && is_space(s[e - 1])) {
        --e;
    }
    std::string out(s.substr(b, e - b));
    std::transform(out.begin(), out.end(), out.begin(), lower);
    return out;
}

void
add_record(MetricAggregate& agg, const ExampleRecord& r) {
    if (r.error) {
        ++agg.failed;
        return;
    }
    ++agg.count;
    agg.em += r.em;
    agg.f1 += r.f1;
    agg.anls += r.anls;
    if (!r.recall_at_k.empty()) {
        ++agg.recall_count;
        for (const auto& [k, v] : r.recall_at_k) {
            agg.recall_at_k[k] += v;
        }
    }
}

void
finish(MetricAggregate& agg) {
    if (agg.count > 0) {
        const auto n = static_cast<double>(agg.count);
        agg.em /= n;
        agg.f1 /= n;
        agg.anls /= n;
    }
    if (agg.recall_count > 0) {
        for (auto& [k, v] : agg.recall_at_k) {
            v /= static_cast<double>(agg.recall_count);
        }
    }
}

json
aggregate_json(const MetricAggregate& agg) {
    json j;
    j["count"] = agg.count;
    j["failed"] = agg.failed;
    j["em"] = agg.em;
    j["f1"] = agg.f1;
    j["anls"] = agg.anls;
    json recall = json::object();
    for (const auto& [k, v] : agg.recall_at_k) {
        recall[std::to_string(k)] = v;
    }
    j["recall_count"] = agg.recall_count;
    j["recall_at_k"] = std::move(recall);
    return j;
}

json
page_json(const PageRef& p) {
    return {{"doc_id", p.doc.str()}, {"page_index", p.page_index}, {"global_id", p.global_id}};
}

}  // namespace

std::string
normalize_answer(std::string_view s) {
    std::string cleaned;
    cleaned.reserve(s.size());
    for (char c : s) {
        if (!is_punct(c)) {
            cleaned.push_back(lower(c));
        }
    }
    std::string out;
    for (const auto& tok : split_ws(cleaned)) {
        if (tok == "a" || tok == "an" || tok == "the") {
            continue;
        }
        if (!out.empty()) {
            out.push_back(' ');
        }
        out += tok;
    }
    return out;
}

int
exact_match(std::string_view pred, const std::vector<std::string>& golds) {
    const std::string p = normalize_answer(pred);
    for (const auto& g : golds) {
        if (normalize_answer(g) == p) {
            return 1;
        }
    }
    return 0;
}

double
token_f1(std::string_view pred, const std::vector<std::string>& golds) {
    const auto pred_tokens = split_ws(normalize_answer(pred));
    double best = 0.0;
    for (const auto& g : golds) {
        const auto gold_tokens = split_ws(normalize_answer(g));
        double f1 = 0.0;
        if (pred_tokens.empty() || gold_tokens.empty()) {
            f1 = (pred_tokens.empty() && gold_tokens.empty()) ? 1.0 : 0.0;
        } else {
            std::unordered_map<std::string, int> counts;
            for (const auto& t : gold_tokens) {
                ++counts[t];
            }
            int common = 0;
            for (const auto& t : pred_tokens) {
                auto it = counts.find(t);
                if (it != counts.end() && it->second > 0) {
                    --it->second;
                    ++common;
                }
            }
            if (common > 0) {
                const double precision = static_cast<double>(common) / static_cast<double>(pred_tokens.size());
                const double recall = static_cast<double>(common) / static_cast<double>(gold_tokens.size());
                f1 = 2.0 * precision * recall / (precision + recall);
            }
        }
        best = std::max(best, f1);
    }
    return best;
}

std::size_t
levenshtein(std::string_view a, std::string_view b) {
    const std::u32string x = decode_utf8(a);
    const std::u32string y = decode_utf8(b);
    std::vector<std::size_t> prev(y.size() + 1);
    std::vector<std::size_t> cur(y.size() + 1);
    for (std::size_t j = 0; j <= y.size(); ++j) {
        prev[j] = j;
    }
    for (std::size_t i = 1; i <= x.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= y.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (x[i - 1] == y[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[y.size()];
}

double
anls(std::string_view pred, const std::vector<std::string>& golds, double tau) {
    const std::string p = anls_prepare(pred);
    const std::size_t plen = decode_utf8(p).size();
    double best = 0.0;
    for (const auto& g : golds) {
        const std::string q = anls_prepare(g);
        const std::size_t longest = std::max(plen, decode_utf8(q).size());
        double nls = 1.0;
        if (longest > 0) {
            nls = 1.0 - static_cast<double>(levenshtein(p, q)) / static_cast<double>(longest);
        }
        best = std::max(best, nls >= tau ? nls : 0.0);
    }
    return best;
}

double
recall_at_k(const std::vector<Hit>& hits, const std::vector<std::uint32_t>& gold_global_ids, std::size_t k) {
    if (gold_global_ids.empty()) {
        throw Error(ErrorKind::kInvalidArgument, "recall_at_k needs at least one gold page");
    }
    const std::size_t depth = std::min(k, hits.size());
    std::size_t found = 0;
    for (std::uint32_t g : gold_global_ids) {
        for (std::size_t i = 0; i < depth; ++i) {
            if (hits[i].page.global_id == g) {
                ++found;
                break;
            }
        }
    }
    return static_cast<double>(found) / static_cast<double>(gold_global_ids.size());
}

double
percentile_nearest_rank(std::vector<double> values, double p) {
    if (values.empty()) {
        return 0.0;
    }
    std::sort(values.begin(), values.end());
    const auto n = static_cast<double>(values.size());
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    return values[rank - 1];
}

LatencyStats
latency_stats(const std::vector<double>& samples) {
    return {percentile_nearest_rank(samples, 50.0), percentile_nearest_rank(samples, 95.0)};
}

EvalReport
build_report(std::vector<ExampleRecord> records, std::string config_json) {
    EvalReport report;
    report.config_json = std::move(config_json);
    std::sort(records.begin(), records.end(),
              [](const ExampleRecord& a, const ExampleRecord& b) { return a.id < b.id; });
    std::vector<double> retrieval;
    std::vector<double> generation;
    for (const auto& r : records) {
        add_record(report.overall, r);
        add_record(report.by_hops[std::string(hops_name(r.hops))], r);
        for (Modality m : r.modalities) {
            add_record(report.by_modality[std::string(modality_name(m))], r);
        }
        if (!r.error) {
            retrieval.push_back(r.retrieval_ms);
            generation.push_back(r.generation_ms);
        }
    }
    finish(report.overall);
    for (auto& [_, agg] : report.by_hops) {
        finish(agg);
    }
    for (auto& [_, agg] : report.by_modality) {
        finish(agg);
    }
    report.retrieval_latency = latency_stats(retrieval);
    report.generation_latency = latency_stats(generation);
    report.records = std::move(records);
    return report;
}

std::string
report_to_json(const EvalReport& report, bool include_latency) {
    json j;
    j["config"] = json::parse(report.config_json);
    j["overall"] = aggregate_json(report.overall);
    json hops = json::object();
    for (const auto& [name, agg] : report.by_hops) {
        hops[name] = aggregate_json(agg);
    }
    json mods = json::object();
    for (const auto& [name, agg] : report.by_modality) {
        mods[name] = aggregate_json(agg);
    }
    j["slices"] = {{"hops", std::move(hops)}, {"modality", std::move(mods)}};
    if (include_latency) {
        j["latency_ms"] = {
            {"retrieval", {{"p50", report.retrieval_latency.p50}, {"p95", report.retrieval_latency.p95}}},
            {"generation", {{"p50", report.generation_latency.p50}, {"p95", report.generation_latency.p95}}}};
    }
    json examples = json::array();
    for (const auto& r : report.records) {
        json e;
        e["id"] = r.id;
        e["question"] = r.question;
        e["hops"] = std::string(hops_name(r.hops));
        json mods_e = json::array();
        for (Modality m : r.modalities) {
            mods_e.push_back(std::string(modality_name(m)));
        }
        e["modalities"] = std::move(mods_e);
        if (r.error) {
            e["error"] = *r.error;
        } else {
            e["answer"] = r.answer;
            e["em"] = r.em;
            e["f1"] = r.f1;
            e["anls"] = r.anls;
        }
        json hits = json::array();
        for (const auto& h : r.hits) {
            json hj = page_json(h.page);
            hj["score"] = h.score;
            hits.push_back(std::move(hj));
        }
        e["hits"] = std::move(hits);
        json used = json::array();
        for (const auto& p : r.pages_used) {
            used.push_back(page_json(p));
        }
        e["pages_used"] = std::move(used);
        if (!r.recall_at_k.empty()) {
            json rec = json::object();
            for (const auto& [k, v] : r.recall_at_k) {
                rec[std::to_string(k)] = v;
            }
            e["recall_at_k"] = std::move(rec);
        }
        e["generator"] = r.generator;
        if (include_latency) {
            e["retrieval_ms"] = r.retrieval_ms;
            e["generation_ms"] = r.generation_ms;
        }
        examples.push_back(std::move(e));
    }
    j["examples"] = std::move(examples);
    return j.dump(2) + "\n";
}

std::string
render_table(const EvalReport& report) {
    struct Column {
        std::string name;
        const MetricAggregate* agg;
    };
    std::vector<Column> cols;
    for (Modality m : kAllModalities) {
        auto it = report.by_modality.find(std::string(modality_name(m)));
        if (it != report.by_modality.end()) {
            std::string name(modality_name(m));
            name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
            cols.push_back({name, &it->second});
        }
    }
    for (Hops h : {Hops::kSingle, Hops::kMulti}) {
        auto it = report.by_hops.find(std::string(hops_name(h)));
        if (it != report.by_hops.end()) {
            cols.push_back({h == Hops::kSingle ? "Single-hop" : "Multi-hop", &it->second});
        }
    }
    cols.push_back({"Overall", &report.overall});

    std::ostringstream out;
    char buf[64];
    out << "        ";
    for (const auto& c : cols) {
        std::snprintf(buf, sizeof(buf), " %11s", c.name.c_str());
        out << buf;
    }
    out << '\n';
    auto row = [&](const char* label, auto value) {
        std::snprintf(buf, sizeof(buf), "%-8s", label);
        out << buf;
        for (const auto& c : cols) {
            out << value(*c.agg);
        }
        out << '\n';
    };
    auto pct = [&](double v) {
        std::snprintf(buf, sizeof(buf), " %11.1f", 100.0 * v);
        return std::string(buf);
    };
    row("EM", [&](const MetricAggregate& a) { return pct(a.em); });
    row("F1", [&](const MetricAggregate& a) { return pct(a.f1); });
    row("ANLS", [&](const MetricAggregate& a) { return pct(a.anls); });
    row("N", [&](const MetricAggregate& a) {
        std::snprintf(buf, sizeof(buf), " %11zu", a.count);
        return std::string(buf);
    });
    if (report.overall.failed > 0) {
        out << "failed: " << report.overall.failed << '\n';
    }
    return out.str();
}

}  // namespace latepage
