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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "latepage/core.h"
#include "latepage/pipeline.h"

namespace latepage {

// Version-1 JSON wire protocols spoken with external embedding and answer
// generation services. Field layouts are documented in docs/protocols.md.

inline constexpr int kProtocolVersion = 1;

std::string
base64_encode(std::span<const std::byte> bytes);
/// Throws kFormat on malformed input.
std::vector<std::byte>
base64_decode(std::string_view text);

enum class ImageEncoding { kBase64, kPath };

/// {"v":1,"image":...,"image_encoding":"base64"|"path"}
std::string
encode_embed_page_request(const PageArtifact& page, ImageEncoding encoding);
/// {"v":1,"text":...}
std::string
encode_embed_query_request(std::string_view text);
/// {"v":1,"rows":n,"dim":d,"data":base64 of n*d little-endian float32}
std::string
encode_embedding_response(const MultiVecEmbedding& embedding);
/// Throws kFormat for malformed bodies or an {"error": ...} object.
MultiVecEmbedding
decode_embedding_response(std::string_view body);

/// "<doc_id>/<page_index>"
std::string
page_wire_id(const PageRef& ref);

std::string
encode_generate_request(std::string_view question, std::span<const PageArtifact> pages, int max_new_tokens,
                        ImageEncoding encoding);

struct GenerateResponse {
    std::string answer;
    std::string model;
};

std::string
encode_generate_response(const GenerateResponse& response);
GenerateResponse
decode_generate_response(std::string_view body);

struct HttpEndpoint {
    std::string base;  // scheme://host[:port]
    std::string path;  // starts with '/'
};

/// Accepts "http://host:port/path" and the CLI spelling "http:http://...".
HttpEndpoint
parse_endpoint(std::string_view url);

/// Embedder client. Shape is declared up front and every response is checked
/// against it.
class HttpEmbedder : public EmbedderProvider {
public:
    HttpEmbedder(std::string url, std::uint32_t dim, std::uint32_t tokens_per_page,
                 ImageEncoding encoding = ImageEncoding::kBase64, int timeout_s = 60);

    std::string
    identity() const override;
    EmbedderCapabilities
    capabilities() const override {
        return {dim_, tokens_per_page_};
    }
    MultiVecEmbedding
    embed_page(const PageArtifact& page) const override;
    MultiVecEmbedding
    embed_query(std::string_view text) const override;

private:
    MultiVecEmbedding
    post(const std::string& body, std::size_t expected_rows) const;

    HttpEndpoint endpoint_;
    std::string url_;
    std::uint32_t dim_;
    std::uint32_t tokens_per_page_;
    ImageEncoding encoding_;
    int timeout_s_;
};

/// Generator client. At most `max_in_flight` requests are outstanding at
/// once; further callers block.
class HttpGenerator : public AnswerGenerator {
public:
    HttpGenerator(std::string url, std::size_t max_pages = 4, int max_new_tokens = 64,
                  std::size_t max_in_flight = 1, ImageEncoding encoding = ImageEncoding::kBase64,
                  int timeout_s = 120);
    ~HttpGenerator() override;

    std::string
    identity() const override;
    std::size_t
    max_pages() const override {
        return max_pages_;
    }
    std::string
    generate(std::string_view question, std::span<const PageArtifact> pages) const override;

    /// Model name reported by the last successful response.
    std::string
    last_model() const;

private:
    struct Limiter;

    HttpEndpoint endpoint_;
    std::string url_;
    std::size_t max_pages_;
    int max_new_tokens_;
    ImageEncoding encoding_;
    int timeout_s_;
    std::unique_ptr<Limiter> limiter_;
};

}  // namespace latepage
