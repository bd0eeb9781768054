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
#include <vector>

#include "latepage/core.h"

namespace latepage {

/// In-memory form of the flattened corpus tensor: page_count blocks of
/// tokens_per_page x dim floats ordered by global id.
class EmbeddingStore {
public:
    EmbeddingStore() = default;
    /// Zero-filled store, filled page by page with set_page.
    EmbeddingStore(std::uint32_t dim, std::uint32_t tokens_per_page, std::uint64_t page_count,
                   std::string provider_id);
    EmbeddingStore(std::uint32_t dim, std::uint32_t tokens_per_page, std::uint64_t page_count,
                   std::string provider_id, std::vector<float> data);

    std::uint32_t
    dim() const noexcept {
        return dim_;
    }
    std::uint32_t
    tokens_per_page() const noexcept {
        return tokens_per_page_;
    }
    std::uint64_t
    page_count() const noexcept {
        return page_count_;
    }
    std::uint64_t
    token_count() const noexcept {
        return page_count_ * tokens_per_page_;
    }
    const std::string&
    provider_id() const noexcept {
        return provider_id_;
    }
    std::span<const float>
    data() const noexcept {
        return data_;
    }

    EmbeddingView
    page(std::uint64_t global_id) const {
        return {data_.data() + global_id * page_stride(), tokens_per_page_, dim_};
    }
    std::span<const float>
    token(std::uint64_t vector_id) const {
        return {data_.data() + vector_id * dim_, dim_};
    }

    /// Shape-checked copy of one page's embedding.
    void
    set_page(std::uint64_t global_id, const MultiVecEmbedding& embedding);

    /// CRC-64 of the little-endian payload bytes; identifies the store contents.
    std::uint64_t
    payload_crc() const;

    bool operator==(const EmbeddingStore&) const = default;

private:
    std::size_t
    page_stride() const noexcept {
        return static_cast<std::size_t>(tokens_per_page_) * dim_;
    }

    std::uint32_t dim_ = 0;
    std::uint32_t tokens_per_page_ = 0;
    std::uint64_t page_count_ = 0;
    std::string provider_id_;
    std::vector<float> data_;
};

/// Throws kDimensionMismatch / kIncomplete when the store does not cover the
/// manifest's pages with its dim and tokens_per_page.
void
check_store_matches(const CorpusManifest& manifest, const EmbeddingStore& store);

}  // namespace latepage
