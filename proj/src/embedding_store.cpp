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

#include "latepage/embedding_store.h"

#include <algorithm>
#include <bit>
#include <cmath>

#include "latepage/crc64.h"
#include "latepage/error.h"

namespace latepage {

EmbeddingStore::EmbeddingStore(std::uint32_t dim, std::uint32_t tokens_per_page, std::uint64_t page_count,
                               std::string provider_id)
    : EmbeddingStore(dim, tokens_per_page, page_count, std::move(provider_id),
                     std::vector<float>(page_count * tokens_per_page * dim, 0.0F)) {
}

EmbeddingStore::EmbeddingStore(std::uint32_t dim, std::uint32_t tokens_per_page, std::uint64_t page_count,
                               std::string provider_id, std::vector<float> data)
    : dim_(dim),
      tokens_per_page_(tokens_per_page),
      page_count_(page_count),
      provider_id_(std::move(provider_id)),
      data_(std::move(data)) {
    if (dim_ == 0 || tokens_per_page_ == 0) {
        throw Error(ErrorKind::kInvalidArgument, "embedding store needs dim >= 1 and tokens_per_page >= 1");
    }
    if (data_.size() != page_count_ * tokens_per_page_ * dim_) {
        throw Error(ErrorKind::kDimensionMismatch, "embedding store payload has the wrong size");
    }
}

void
EmbeddingStore::set_page(std::uint64_t global_id, const MultiVecEmbedding& embedding) {
    if (global_id >= page_count_) {
        throw Error(ErrorKind::kNotFound, "page " + std::to_string(global_id) + " outside store");
    }
    if (embedding.dim() != dim_) {
        throw Error(ErrorKind::kDimensionMismatch, "page embedding dim " + std::to_string(embedding.dim()) +
                                                       " does not match store dim " + std::to_string(dim_));
    }
    if (embedding.rows() != tokens_per_page_) {
        throw Error(ErrorKind::kDimensionMismatch, "page embedding has " + std::to_string(embedding.rows()) +
                                                       " rows, store expects " +
                                                       std::to_string(tokens_per_page_));
    }
    std::copy(embedding.values().begin(), embedding.values().end(),
              data_.begin() + static_cast<std::ptrdiff_t>(global_id * page_stride()));
}

std::uint64_t
EmbeddingStore::payload_crc() const {
    static_assert(std::endian::native == std::endian::little, "payload CRC assumes a little-endian host");
    return crc64(std::as_bytes(std::span<const float>(data_)));
}

void
check_store_matches(const CorpusManifest& manifest, const EmbeddingStore& store) {
    if (store.dim() != manifest.dim) {
        throw Error(ErrorKind::kDimensionMismatch, "store dim " + std::to_string(store.dim()) +
                                                       " does not match manifest dim " +
                                                       std::to_string(manifest.dim));
    }
    if (store.tokens_per_page() != manifest.tokens_per_page) {
        throw Error(ErrorKind::kDimensionMismatch,
                    "store tokens_per_page " + std::to_string(store.tokens_per_page()) +
                        " does not match manifest tokens_per_page " + std::to_string(manifest.tokens_per_page));
    }
    if (store.page_count() != manifest.page_count()) {
        throw Error(ErrorKind::kIncomplete, "store has " + std::to_string(store.page_count()) +
                                                " pages, manifest has " + std::to_string(manifest.page_count()));
    }
}

}  // namespace latepage
