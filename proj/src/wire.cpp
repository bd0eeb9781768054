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

#include "latepage/wire.h"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <condition_variable>
#include <cstring>
#include <mutex>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "latepage/error.h"
#include "latepage/storage.h"

namespace latepage {

namespace {

using json = nlohmann::ordered_json;

json
parse_body(std::string_view body, const char* what) {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw Error(ErrorKind::kFormat, std::string(what) + " is not a JSON object");
    }
    if (j.contains("error")) {
        throw Error(ErrorKind::kFormat, std::string(what) + " reports an error: " + j.at("error").dump());
    }
    if (!j.contains("v") || !j.at("v").is_number_integer() || j.at("v").get<int>() != kProtocolVersion) {
        throw Error(ErrorKind::kVersionMismatch, std::string(what) + " has a missing or unsupported protocol version");
    }
    return j;
}

json
image_field(const PageArtifact& page, ImageEncoding encoding) {
    if (encoding == ImageEncoding::kPath) {
        return {{"image", page.image_path.string()}, {"image_encoding", "path"}};
    }
    return {{"image", base64_encode(read_file(page.image_path))}, {"image_encoding", "base64"}};
}

std::string
post_json(const HttpEndpoint& endpoint, const std::string& body, int timeout_s) {
    httplib::Client client(endpoint.base);
    client.set_connection_timeout(timeout_s, 0);
    client.set_read_timeout(timeout_s, 0);
    client.set_write_timeout(timeout_s, 0);
    auto res = client.Post(endpoint.path, body, "application/json");
    if (!res) {
        throw Error(ErrorKind::kTransport, endpoint.base + endpoint.path + ": " + httplib::to_string(res.error()));
    }
    if (res->status >= 500) {
        throw Error(ErrorKind::kTransport,
                    endpoint.base + endpoint.path + ": HTTP " + std::to_string(res->status) + " " + res->body);
    }
    if (res->status >= 400) {
        throw Error(ErrorKind::kFormat,
                    endpoint.base + endpoint.path + ": HTTP " + std::to_string(res->status) + " " + res->body);
    }
    return res->body;
}

}  // namespace

std::string
base64_encode(std::span<const std::byte> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::vector<std::byte>
base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) {
        throw Error(ErrorKind::kFormat, "base64 length is not a multiple of 4");
    }
    // EVP_DecodeBlock skips whitespace and tolerates stray padding; the wire
    // format does not.
    const std::size_t body = text.size() - std::min<std::size_t>(2, text.size() - text.find_last_not_of('=') - 1);
    for (std::size_t i = 0; i < text.size(); ++i) {
        const auto c = static_cast<unsigned char>(text[i]);
        const bool ok = i >= body ? c == '=' : (std::isalnum(c) != 0 || c == '+' || c == '/');
        if (!ok) {
            throw Error(ErrorKind::kFormat, "malformed base64");
        }
    }
    std::vector<std::byte> out(3 * (text.size() / 4));
    const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
    if (n < 0) {
        throw Error(ErrorKind::kFormat, "malformed base64");
    }
    std::size_t pad = 0;
    if (!text.empty() && text.back() == '=') {
        ++pad;
        if (text.size() >= 2 && text[text.size() - 2] == '=') {
            ++pad;
        }
    }
    out.resize(static_cast<std::size_t>(n) - pad);
    return out;
}

std::string
encode_embed_page_request(const PageArtifact& page, ImageEncoding encoding) {
    json j;
    j["v"] = kProtocolVersion;
    const json image = image_field(page, encoding);
    for (const auto& [k, v] : image.items()) {
        j[k] = v;
    }
    return j.dump();
}

std::string
encode_embed_query_request(std::string_view text) {
    json j;
    j["v"] = kProtocolVersion;
    j["text"] = std::string(text);
    return j.dump();
}

std::string
encode_embedding_response(const MultiVecEmbedding& embedding) {
    json j;
    j["v"] = kProtocolVersion;
    j["rows"] = embedding.rows();
    j["dim"] = embedding.dim();
    j["data"] = base64_encode(std::as_bytes(embedding.values()));
    return j.dump();
}

MultiVecEmbedding
decode_embedding_response(std::string_view body) {
    const json j = parse_body(body, "embedding response");
    if (!j.contains("rows") || !j.contains("dim") || !j.contains("data") || !j.at("data").is_string()) {
        throw Error(ErrorKind::kFormat, "embedding response needs rows, dim and data");
    }
    const auto rows = j.at("rows").get<std::size_t>();
    const auto dim = j.at("dim").get<std::size_t>();
    const auto bytes = base64_decode(j.at("data").get<std::string>());
    if (bytes.size() != rows * dim * sizeof(float)) {
        throw Error(ErrorKind::kFormat, "embedding response data has " + std::to_string(bytes.size()) +
                                            " bytes, expected " + std::to_string(rows * dim * sizeof(float)));
    }
    std::vector<float> data(rows * dim);
    std::memcpy(data.data(), bytes.data(), bytes.size());
    return {rows, dim, std::move(data)};
}

std::string
page_wire_id(const PageRef& ref) {
    return ref.doc.str() + "/" + std::to_string(ref.page_index);
}

std::string
encode_generate_request(std::string_view question, std::span<const PageArtifact> pages, int max_new_tokens,
                        ImageEncoding encoding) {
    json j;
    j["v"] = kProtocolVersion;
    j["question"] = std::string(question);
    json arr = json::array();
    for (const auto& p : pages) {
        json page;
        page["page_id"] = page_wire_id(p.ref);
        const json image = image_field(p, encoding);
        for (const auto& [k, v] : image.items()) {
            page[k] = v;
        }
        arr.push_back(std::move(page));
    }
    j["pages"] = std::move(arr);
    j["max_new_tokens"] = max_new_tokens;
    return j.dump();
}

std::string
encode_generate_response(const GenerateResponse& response) {
    json j;
    j["v"] = kProtocolVersion;
    j["answer"] = response.answer;
    j["model"] = response.model;
    return j.dump();
}

GenerateResponse
decode_generate_response(std::string_view body) {
    const json j = parse_body(body, "generate response");
    if (!j.contains("answer") || !j.at("answer").is_string()) {
        throw Error(ErrorKind::kFormat, "generate response needs a string answer");
    }
    GenerateResponse r;
    r.answer = j.at("answer").get<std::string>();
    if (j.contains("model") && j.at("model").is_string()) {
        r.model = j.at("model").get<std::string>();
    }
    return r;
}

HttpEndpoint
parse_endpoint(std::string_view url) {
    if (url.rfind("http:http", 0) == 0) {
        url.remove_prefix(5);
    }
    const auto scheme = url.find("://");
    if (scheme == std::string_view::npos || (url.substr(0, scheme) != "http" && url.substr(0, scheme) != "https")) {
        throw Error(ErrorKind::kConfig, "endpoint must be an http(s) URL: " + std::string(url));
    }
    const auto slash = url.find('/', scheme + 3);
    if (slash == std::string_view::npos) {
        return {std::string(url), "/"};
    }
    return {std::string(url.substr(0, slash)), std::string(url.substr(slash))};
}

HttpEmbedder::HttpEmbedder(std::string url, std::uint32_t dim, std::uint32_t tokens_per_page, ImageEncoding encoding,
                           int timeout_s)
    : endpoint_(parse_endpoint(url)),
      url_(std::move(url)),
      dim_(dim),
      tokens_per_page_(tokens_per_page),
      encoding_(encoding),
      timeout_s_(timeout_s) {
}

std::string
HttpEmbedder::identity() const {
    return "http/1 " + endpoint_.base + endpoint_.path + " dim=" + std::to_string(dim_) +
           " tokens_per_page=" + std::to_string(tokens_per_page_);
}

MultiVecEmbedding
HttpEmbedder::post(const std::string& body, std::size_t expected_rows) const {
    MultiVecEmbedding e = decode_embedding_response(post_json(endpoint_, body, timeout_s_));
    if (e.dim() != dim_) {
        throw Error(ErrorKind::kDimensionMismatch, "embedder returned dim " + std::to_string(e.dim()) +
                                                       ", declared " + std::to_string(dim_));
    }
    if (expected_rows != 0 && e.rows() != expected_rows) {
        throw Error(ErrorKind::kDimensionMismatch, "embedder returned " + std::to_string(e.rows()) +
                                                       " page rows, declared " + std::to_string(expected_rows));
    }
    return e;
}

MultiVecEmbedding
HttpEmbedder::embed_page(const PageArtifact& page) const {
    return post(encode_embed_page_request(page, encoding_), tokens_per_page_);
}

MultiVecEmbedding
HttpEmbedder::embed_query(std::string_view text) const {
    return post(encode_embed_query_request(text), 0);
}

struct HttpGenerator::Limiter {
    std::mutex mu;
    std::condition_variable cv;
    std::size_t available;
    std::string last_model;

    explicit Limiter(std::size_t n) : available(n) {
    }
};

HttpGenerator::HttpGenerator(std::string url, std::size_t max_pages, int max_new_tokens, std::size_t max_in_flight,
                             ImageEncoding encoding, int timeout_s)
    : endpoint_(parse_endpoint(url)),
      url_(std::move(url)),
      max_pages_(max_pages),
      max_new_tokens_(max_new_tokens),
      encoding_(encoding),
      timeout_s_(timeout_s),
      limiter_(std::make_unique<Limiter>(std::max<std::size_t>(1, max_in_flight))) {
}

HttpGenerator::~HttpGenerator() = default;

std::string
HttpGenerator::identity() const {
    return "http/1 " + endpoint_.base + endpoint_.path;
}

std::string
HttpGenerator::last_model() const {
    std::lock_guard lock(limiter_->mu);
    return limiter_->last_model;
}

std::string
HttpGenerator::generate(std::string_view question, std::span<const PageArtifact> pages) const {
    if (pages.size() > max_pages_) {
        throw Error(ErrorKind::kInvalidArgument, "generator accepts at most " + std::to_string(max_pages_) + " pages");
    }
    const std::string body = encode_generate_request(question, pages, max_new_tokens_, encoding_);
    {
        std::unique_lock lock(limiter_->mu);
        limiter_->cv.wait(lock, [&] { return limiter_->available > 0; });
        --limiter_->available;
    }
    struct Release {
        Limiter& l;
        ~Release() {
            {
                std::lock_guard lock(l.mu);
                ++l.available;
            }
            l.cv.notify_one();
        }
    } release{*limiter_};
    GenerateResponse r = decode_generate_response(post_json(endpoint_, body, timeout_s_));
    std::lock_guard lock(limiter_->mu);
    limiter_->last_model = r.model;
    return r.answer;
}

}  // namespace latepage
