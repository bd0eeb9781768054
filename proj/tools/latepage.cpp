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

// latepage: ingest, embed, index, search, eval and bench subcommands over a
// work directory holding manifest.json, embeddings.m3e and index.m3i.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "latepage/bench.h"
#include "latepage/core.h"
#include "latepage/error.h"
#include "latepage/index.h"
#include "latepage/metrics.h"
#include "latepage/pipeline.h"
#include "latepage/storage.h"
#include "latepage/wire.h"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace latepage;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

// Thrown for argument and input validation failures (exit 2).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void
log(const std::string& msg) {
    std::cerr << "[latepage] " << msg << "\n";
}

struct Options {
    std::string workdir = ".";
    std::string provider = "mock";
    std::uint64_t mock_seed = 0;
    std::string image_encoding = "base64";
    std::size_t workers = 1;
    int timeout_s = 60;

    // ingest
    std::string manifest;
    bool allow_missing = false;

    // index
    std::string kind = "flat";
    std::uint32_t nlist = 0;
    std::uint32_t nprobe = 0;
    std::uint32_t m = 0;
    std::uint32_t nbits = 8;
    std::uint32_t candidate_pages = 0;
    std::uint32_t kmeans_iters = 20;
    std::uint64_t kmeans_seed = 1234;
    std::uint32_t kmeans_restarts = 1;

    // search / eval
    std::string query;
    std::size_t k = 4;
    std::string doc;
    std::uint32_t search_nprobe = 0;
    std::uint32_t search_candidates = 0;
    std::string examples;
    std::string generator = "stub";
    std::size_t generator_pages = 0;
    std::string mode = "open";
    int max_new_tokens = 64;
    std::size_t max_in_flight = 1;
    bool no_latency = false;

    // bench
    std::vector<std::string> sizes{"1e4", "1e5", "1e6"};
    std::vector<std::string> kinds{"flat", "ivfflat", "ivfpq"};
    std::uint32_t bench_tpp = 32;
    std::uint32_t bench_dim = 64;
    std::uint32_t bench_clusters = 256;
    std::uint32_t query_rows = 16;
    std::size_t queries = 20;
    std::size_t bench_k = 10;
    std::uint64_t bench_seed = 7;
};

fs::path
manifest_file(const Options& o) {
    return fs::path(o.workdir) / "manifest.json";
}
fs::path
store_file(const Options& o) {
    return fs::path(o.workdir) / "embeddings.m3e";
}
fs::path
index_file(const Options& o) {
    return fs::path(o.workdir) / "index.m3i";
}

ImageEncoding
parse_encoding(const std::string& s) {
    if (s == "base64") {
        return ImageEncoding::kBase64;
    }
    if (s == "path") {
        return ImageEncoding::kPath;
    }
    throw UsageError("--image-encoding must be base64 or path, got '" + s + "'");
}

std::string
http_url(const std::string& spec) {
    return spec.substr(std::string("http:").size());
}

std::unique_ptr<EmbedderProvider>
make_embedder(const Options& o, const CorpusManifest& manifest) {
    if (o.provider == "mock") {
        return std::make_unique<MockEmbedder>(manifest.dim, manifest.tokens_per_page, o.mock_seed);
    }
    if (o.provider.rfind("http:", 0) == 0) {
        return std::make_unique<HttpEmbedder>(http_url(o.provider), manifest.dim, manifest.tokens_per_page,
                                              parse_encoding(o.image_encoding), o.timeout_s);
    }
    throw UsageError("--provider must be mock or http:URL, got '" + o.provider + "'");
}

std::unique_ptr<AnswerGenerator>
make_generator(const Options& o, std::size_t pages) {
    if (o.generator == "stub") {
        return std::make_unique<KeywordStubGenerator>(pages);
    }
    if (o.generator == "echo") {
        return std::make_unique<EchoGenerator>();
    }
    if (o.generator.rfind("http:", 0) == 0) {
        return std::make_unique<HttpGenerator>(http_url(o.generator), pages, o.max_new_tokens, o.max_in_flight,
                                               parse_encoding(o.image_encoding), o.timeout_s);
    }
    throw UsageError("--generator must be stub, echo or http:URL, got '" + o.generator + "'");
}

IndexConfig
index_config(const Options& o) {
    IndexConfig c;
    try {
        c.kind = parse_index_kind(o.kind);
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    c.nlist = o.nlist;
    c.nprobe = o.nprobe;
    c.m = o.m;
    c.nbits = o.nbits;
    c.candidate_pages = o.candidate_pages;
    c.kmeans = {o.kmeans_iters, o.kmeans_seed, o.kmeans_restarts};
    return c;
}

json
index_config_json(const IndexConfig& c) {
    json j;
    j["kind"] = index_kind_name(c.kind);
    if (c.kind != IndexKind::kFlat) {
        j["nlist"] = c.nlist;
        j["nprobe"] = c.nprobe;
        j["candidate_pages"] = c.candidate_pages;
        j["kmeans"] = {{"iters", c.kmeans.iters}, {"seed", c.kmeans.seed}, {"restarts", c.kmeans.restarts}};
    }
    if (c.kind == IndexKind::kIvfPq) {
        j["m"] = c.m;
        j["nbits"] = c.nbits;
    }
    return j;
}

json
provider_json(const Options& o) {
    json j;
    j["provider"] = o.provider;
    if (o.provider == "mock") {
        j["mock_seed"] = o.mock_seed;
    } else {
        j["image_encoding"] = o.image_encoding;
    }
    return j;
}

// A workspace file that was never written is a missing step, not a fault.
void
require_step(const fs::path& path, const char* step) {
    if (!fs::exists(path)) {
        throw UsageError(path.string() + " not found; run '" + step + "' first");
    }
}

std::shared_ptr<const CorpusManifest>
load_manifest(const Options& o) {
    require_step(manifest_file(o), "ingest");
    return std::make_shared<const CorpusManifest>(read_manifest(manifest_file(o)));
}

std::shared_ptr<const EmbeddingStore>
load_store(const Options& o, const CorpusManifest& manifest) {
    require_step(store_file(o), "embed");
    auto store = std::make_shared<const EmbeddingStore>(read_store(store_file(o)));
    check_store_matches(manifest, *store);
    return store;
}

void
check_provider(const EmbedderProvider& provider, const EmbeddingStore& store) {
    if (provider.identity() != store.provider_id()) {
        throw UsageError("provider '" + provider.identity() + "' does not match the store's provider '" +
                         store.provider_id() + "'");
    }
}

void
emit(const json& j) {
    std::cout << j.dump() << "\n";
}

int
cmd_ingest(const Options& o) {
    if (o.manifest.empty()) {
        throw UsageError("ingest requires --manifest");
    }
    CorpusManifest manifest = read_manifest(o.manifest);
    const fs::path source_dir = fs::absolute(fs::path(o.manifest)).parent_path();
    const fs::path work = fs::absolute(o.workdir);
    fs::create_directories(work);

    json warnings = json::array();
    for (std::uint32_t g = 0; g < manifest.page_count(); ++g) {
        const PageEntry& page = manifest.page(g);
        const fs::path image = (source_dir / page.image_path).lexically_normal();
        if (!fs::exists(image)) {
            warnings.push_back("missing image for " + page.ref.doc.str() + "/" +
                               std::to_string(page.ref.page_index) + ": " + page.image_path);
        }
        // Paths are stored relative to the work directory.
        manifest.set_image_path(g, image.lexically_relative(work));
    }
    for (const auto& w : warnings) {
        log("warning: " + w.get<std::string>());
    }
    if (!warnings.empty() && !o.allow_missing) {
        throw UsageError(std::to_string(warnings.size()) + " page image(s) missing; pass --allow-missing to continue");
    }
    write_manifest(manifest_file(o), manifest);

    json docs = json::array();
    for (const auto& d : manifest.documents()) {
        docs.push_back({{"doc_id", d.id.str()}, {"pages", d.page_count}});
    }
    const std::string summary = std::to_string(manifest.documents().size()) + " docs, N=" +
                                std::to_string(manifest.page_count()) + " pages";
    log(summary);
    json out;
    out["command"] = "ingest";
    out["config"] = {{"manifest", o.manifest}, {"allow_missing", o.allow_missing}};
    out["summary"] = summary;
    out["corpus_id"] = manifest.corpus_id;
    out["documents"] = docs;
    out["warnings"] = warnings;
    emit(out);
    return kExitOk;
}

int
cmd_embed(const Options& o) {
    const auto manifest = load_manifest(o);
    const auto provider = make_embedder(o, *manifest);
    const EmbedSummary s = embed_corpus(*manifest, o.workdir, *provider, store_file(o), o.workers);
    json failures = json::array();
    for (const auto& f : s.failures) {
        const PageEntry& page = manifest->page(f.global_id);
        failures.push_back({{"doc_id", page.ref.doc.str()},
                            {"page_index", page.ref.page_index},
                            {"error", f.message}});
        log("embed failed for " + page.ref.doc.str() + "/" + std::to_string(page.ref.page_index) + ": " +
            f.message);
    }
    json config = provider_json(o);
    config["workers"] = o.workers;
    json out;
    out["command"] = "embed";
    out["config"] = config;
    out["provider_id"] = provider->identity();
    out["embedded"] = s.embedded;
    out["reused"] = s.reused;
    out["failures"] = failures;
    out["complete"] = s.store != nullptr;
    emit(out);
    log("embedded " + std::to_string(s.embedded) + ", reused " + std::to_string(s.reused) + ", failed " +
        std::to_string(s.failures.size()));
    return s.store ? kExitOk : kExitRuntime;
}

int
cmd_index(const Options& o) {
    const auto manifest = load_manifest(o);
    const auto store = load_store(o, *manifest);
    const auto t0 = std::chrono::steady_clock::now();
    const PageIndex index = PageIndex::build(manifest, store, index_config(o));
    const double build_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    save_index(index_file(o), index);
    json out;
    out["command"] = "index";
    out["config"] = index_config_json(index.config());
    out["pages"] = store->page_count();
    out["tokens"] = store->token_count();
    out["build_ms"] = build_ms;
    emit(out);
    log("wrote " + index_file(o).string());
    return kExitOk;
}

SearchParams
search_params(const Options& o) {
    SearchParams p;
    if (o.search_nprobe != 0) {
        p.nprobe = o.search_nprobe;
    }
    if (o.search_candidates != 0) {
        p.candidate_pages = o.search_candidates;
    }
    return p;
}

int
cmd_search(const Options& o) {
    if (o.query.empty()) {
        throw UsageError("search requires --query");
    }
    const auto manifest = load_manifest(o);
    const auto store = load_store(o, *manifest);
    const auto provider = make_embedder(o, *manifest);
    check_provider(*provider, *store);
    require_step(index_file(o), "index");
    const PageIndex index = load_index(index_file(o), manifest, store);

    Scope scope = OpenDomain{};
    if (!o.doc.empty()) {
        scope = ClosedDomain{DocumentId(o.doc)};
    }
    const Query query{"cli", o.query, provider->embed_query(o.query), scope};
    const RetrievalResult result = index.search(query, o.k, search_params(o));

    json hits = json::array();
    for (std::size_t r = 0; r < result.hits.size(); ++r) {
        const Hit& h = result.hits[r];
        json hit;
        hit["rank"] = r + 1;
        hit["doc_id"] = h.page.doc.str();
        hit["page_index"] = h.page.page_index;
        hit["global_id"] = h.page.global_id;
        hit["score"] = h.score;
        hit["image_path"] = manifest->page(h.page.global_id).image_path;
        hits.push_back(std::move(hit));
    }
    json config = provider_json(o);
    config["index"] = index_config_json(index.config());
    config["k"] = o.k;
    if (o.search_nprobe != 0) {
        config["nprobe"] = o.search_nprobe;
    }
    if (index.config().kind != IndexKind::kFlat) {
        config["candidate_pages"] = o.search_candidates != 0 ? o.search_candidates
                                    : index.config().candidate_pages != 0
                                        ? index.config().candidate_pages
                                        : default_candidate_pages(o.k);
    }
    json out;
    out["command"] = "search";
    out["config"] = config;
    out["query"] = o.query;
    out["scope"] = o.doc.empty() ? json("open") : json({{"doc_id", o.doc}});
    out["hits"] = hits;
    emit(out);
    return kExitOk;
}

int
cmd_eval(const Options& o) {
    if (o.examples.empty()) {
        throw UsageError("eval requires --examples");
    }
    if (o.mode != "open" && o.mode != "closed") {
        throw UsageError("--mode must be open or closed, got '" + o.mode + "'");
    }
    const auto examples = read_examples(o.examples);
    const auto manifest = load_manifest(o);
    const auto store = load_store(o, *manifest);
    const auto provider = make_embedder(o, *manifest);
    check_provider(*provider, *store);
    require_step(index_file(o), "index");
    const PageIndex index = load_index(index_file(o), manifest, store);

    const std::size_t pages = o.generator_pages == 0 ? std::min<std::size_t>(o.k, 4) : o.generator_pages;
    const auto generator = make_generator(o, pages);

    Pipeline pipeline;
    pipeline.index = &index;
    pipeline.embedder = provider.get();
    pipeline.generator = generator.get();
    pipeline.base_dir = o.workdir;
    pipeline.config.index = index.config();
    pipeline.config.k = o.k;
    pipeline.config.generator_pages = pages;
    pipeline.config.mode = o.mode == "closed" ? DomainMode::kClosed : DomainMode::kOpen;
    pipeline.config.workers = o.workers;
    pipeline.config.search = search_params(o);
    try {
        validate_pipeline_config(pipeline.config, *generator);
    } catch (const Error& e) {
        throw UsageError(e.what());
    }

    json config = provider_json(o);
    config["index"] = index_config_json(index.config());
    config["k"] = o.k;
    config["generator"] = generator->identity();
    config["generator_pages"] = pages;
    config["mode"] = o.mode;
    config["workers"] = o.workers;
    config["examples"] = fs::path(o.examples).filename().generic_string();

    const EvalReport report = run_benchmark(examples, pipeline, config.dump());
    std::cout << report_to_json(report, !o.no_latency) << "\n";
    std::cerr << render_table(report);
    if (report.overall.failed > 0) {
        log(std::to_string(report.overall.failed) + " example(s) failed; see records[].error");
    }
    return kExitOk;
}

std::uint64_t
parse_size(const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size() || !(v >= 1.0) || v > 1e12 || std::floor(v) != v) {
        throw UsageError("--sizes entries must be positive token counts such as 1e5, got '" + s + "'");
    }
    return static_cast<std::uint64_t>(v);
}

int
cmd_bench(const Options& o) {
    BenchSpec spec;
    spec.tokens_per_page = o.bench_tpp;
    spec.dim = o.bench_dim;
    spec.clusters = o.bench_clusters;
    spec.query_rows = o.query_rows;
    spec.queries = o.queries;
    spec.k = o.bench_k;
    spec.seed = o.bench_seed;
    spec.base = index_config(o);
    spec.kinds.clear();
    for (const auto& k : o.kinds) {
        try {
            spec.kinds.push_back(parse_index_kind(k));
        } catch (const Error& e) {
            throw UsageError(e.what());
        }
    }
    std::vector<std::uint64_t> sizes;
    for (const auto& s : o.sizes) {
        sizes.push_back(parse_size(s));
    }
    for (std::uint64_t tokens : sizes) {
        spec.tokens = tokens;
        log("bench: " + std::to_string(tokens) + " tokens");
        for (const BenchRun& run : run_bench(spec)) {
            json j = json::parse(bench_run_to_json(run));
            j["corpus"] = {{"tokens_per_page", spec.tokens_per_page},
                           {"dim", spec.dim},
                           {"clusters", spec.clusters},
                           {"query_rows", spec.query_rows},
                           {"queries", spec.queries},
                           {"seed", spec.seed}};
            std::cout << j.dump() << "\n" << std::flush;
        }
    }
    return kExitOk;
}

int
exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::kInvalidArgument:
        case ErrorKind::kDimensionMismatch:
        case ErrorKind::kDuplicateId:
        case ErrorKind::kNotFound:
        case ErrorKind::kFormat:
        case ErrorKind::kConfig:
            return kExitUsage;
        default:
            return kExitRuntime;
    }
}

}  // namespace

int
main(int argc, char** argv) {
    Options o;
    CLI::App app{"latepage: multi-vector page retrieval and answering"};
    app.set_config("--config", "", "TOML config file; flags override it")->envname("M3_CONFIG");
    app.fallthrough();
    app.require_subcommand(1);

    app.add_option("--workdir", o.workdir, "Directory holding manifest.json, embeddings.m3e, index.m3i");
    app.add_option("--provider", o.provider, "Embedder: mock or http:URL");
    app.add_option("--mock-seed", o.mock_seed, "Seed of the mock embedder");
    app.add_option("--image-encoding", o.image_encoding, "Page images on the wire: base64 or path");
    app.add_option("--workers", o.workers, "Concurrent embed/eval workers")->check(CLI::PositiveNumber);
    app.add_option("--timeout", o.timeout_s, "HTTP timeout in seconds")->check(CLI::PositiveNumber);

    auto* ingest = app.add_subcommand("ingest", "Validate a manifest and copy it into the work directory");
    ingest->add_option("--manifest", o.manifest, "Corpus manifest JSON")->required();
    ingest->add_flag("--allow-missing", o.allow_missing, "Treat missing page images as warnings");

    app.add_subcommand("embed", "Embed every page into embeddings.m3e");

    auto add_index_options = [&o](CLI::App* sub) {
        sub->add_option("--kind", o.kind, "flat, ivfflat or ivfpq");
        sub->add_option("--nlist", o.nlist, "Coarse centroids (0: ceil(sqrt(tokens)))");
        sub->add_option("--nprobe", o.nprobe, "Lists probed per query row (0: ceil(nlist/16))");
        sub->add_option("--m", o.m, "PQ subquantizers (0: dim/4)");
        sub->add_option("--nbits", o.nbits, "Bits per PQ code");
        sub->add_option("--candidate-pages", o.candidate_pages, "Pages reranked exactly (0: max(100, 10k))");
        sub->add_option("--kmeans-iters", o.kmeans_iters, "Lloyd iterations");
        sub->add_option("--kmeans-seed", o.kmeans_seed, "k-means seed");
        sub->add_option("--kmeans-restarts", o.kmeans_restarts, "k-means restarts");
    };
    auto* index = app.add_subcommand("index", "Build index.m3i over the embedding store");
    add_index_options(index);

    auto add_query_options = [&o](CLI::App* sub) {
        sub->add_option("--k", o.k, "Pages to retrieve")->check(CLI::PositiveNumber);
        sub->add_option("--search-nprobe", o.search_nprobe, "Override nprobe for this run");
        sub->add_option("--search-candidates", o.search_candidates, "Override candidate_pages for this run");
    };
    auto* search = app.add_subcommand("search", "Retrieve the top-k pages for a question");
    search->add_option("--query", o.query, "Question text")->required();
    search->add_option("--doc", o.doc, "Restrict to one document (closed domain)");
    add_query_options(search);

    auto* eval = app.add_subcommand("eval", "Run the retrieval and answering pipeline over QA examples");
    eval->add_option("--examples", o.examples, "QA examples, JSON Lines")->required();
    eval->add_option("--generator", o.generator, "stub, echo or http:URL");
    eval->add_option("--generator-pages", o.generator_pages, "Pages passed to the generator (0: min(k, 4))");
    eval->add_option("--mode", o.mode, "open or closed");
    eval->add_option("--max-new-tokens", o.max_new_tokens, "Generator output budget");
    eval->add_option("--max-in-flight", o.max_in_flight, "Concurrent generator requests");
    eval->add_flag("--no-latency", o.no_latency, "Omit latency fields for byte-stable output");
    add_query_options(eval);

    auto* bench = app.add_subcommand("bench", "Time Flat, IVFFlat and IVFPQ on synthetic corpora");
    bench->add_option("--sizes", o.sizes, "Corpus sizes in token vectors")->delimiter(',');
    bench->add_option("--kinds", o.kinds, "Index kinds")->delimiter(',');
    bench->add_option("--tokens-per-page", o.bench_tpp, "Tokens per synthetic page");
    bench->add_option("--dim", o.bench_dim, "Embedding dimension");
    bench->add_option("--clusters", o.bench_clusters, "Mixture components");
    bench->add_option("--query-rows", o.query_rows, "Rows per query");
    bench->add_option("--queries", o.queries, "Timed queries per index");
    bench->add_option("--k", o.bench_k, "Top-k");
    bench->add_option("--seed", o.bench_seed, "Corpus and query seed");
    add_index_options(bench);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (ingest->parsed()) {
            return cmd_ingest(o);
        }
        if (app.got_subcommand("embed")) {
            return cmd_embed(o);
        }
        if (index->parsed()) {
            return cmd_index(o);
        }
        if (search->parsed()) {
            return cmd_search(o);
        }
        if (eval->parsed()) {
            return cmd_eval(o);
        }
        if (bench->parsed()) {
            return cmd_bench(o);
        }
    } catch (const UsageError& e) {
        log(std::string("error: ") + e.what());
        return kExitUsage;
    } catch (const Error& e) {
        log(std::string("error: ") + e.what());
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        log(std::string("error: ") + e.what());
        return kExitRuntime;
    }
    return kExitUsage;
}
