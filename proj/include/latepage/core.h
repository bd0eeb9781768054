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

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace latepage {

/// Opaque, non-empty document identifier taken from the corpus manifest.
class DocumentId {
public:
    DocumentId() = default;
    explicit DocumentId(std::string value);

    const std::string&
    str() const noexcept {
        return value_;
    }

    auto operator<=>(const DocumentId&) const = default;

private:
    std::string value_;
};

/// Global identity of one page. global_id indexes the flattened corpus.
struct PageRef {
    DocumentId doc;
    std::uint32_t page_index = 0;
    std::uint32_t global_id = 0;

    bool operator==(const PageRef&) const = default;
};

/// Non-owning row-major n x d view.
class EmbeddingView {
public:
    EmbeddingView() = default;
    EmbeddingView(const float* data, std::size_t rows, std::size_t dim)
        : data_(data), rows_(rows), dim_(dim) {
    }

    std::size_t
    rows() const noexcept {
        return rows_;
    }
    std::size_t
    dim() const noexcept {
        return dim_;
    }
    const float*
    data() const noexcept {
        return data_;
    }
    std::span<const float>
    row(std::size_t i) const {
        return {data_ + i * dim_, dim_};
    }
    std::span<const float>
    values() const {
        return {data_, rows_ * dim_};
    }

private:
    const float* data_ = nullptr;
    std::size_t rows_ = 0;
    std::size_t dim_ = 0;
};

/// One query or one page: n rows of d-dimensional 32-bit vectors. Immutable;
/// construction rejects empty shapes and non-finite entries.
class MultiVecEmbedding {
public:
    MultiVecEmbedding(std::size_t rows, std::size_t dim, std::vector<float> data);

    static MultiVecEmbedding
    from_rows(const std::vector<std::vector<float>>& rows);

    std::size_t
    rows() const noexcept {
        return rows_;
    }
    std::size_t
    dim() const noexcept {
        return dim_;
    }
    std::span<const float>
    values() const noexcept {
        return data_;
    }
    std::span<const float>
    row(std::size_t i) const {
        return {data_.data() + i * dim_, dim_};
    }
    EmbeddingView
    view() const noexcept {
        return {data_.data(), rows_, dim_};
    }

    bool operator==(const MultiVecEmbedding&) const = default;

private:
    std::size_t rows_;
    std::size_t dim_;
    std::vector<float> data_;
};

struct PageEntry {
    PageRef ref;
    std::string image_path;

    bool operator==(const PageEntry&) const = default;
};

/// Contiguous run of global ids owned by one document.
struct DocumentSpan {
    DocumentId id;
    std::uint32_t first_global_id = 0;
    std::uint32_t page_count = 0;

    std::uint32_t
    end_global_id() const noexcept {
        return first_global_id + page_count;
    }

    bool operator==(const DocumentSpan&) const = default;
};

/// Flattened corpus registry. Pages are ordered by global_id; documents keep
/// manifest order and own contiguous global id ranges.
class CorpusManifest {
public:
    std::string corpus_id;
    std::uint32_t dim = 0;
    std::uint32_t tokens_per_page = 0;
    std::uint32_t page_width_px = 0;
    std::uint32_t page_height_px = 0;

    CorpusManifest() = default;
    CorpusManifest(std::vector<DocumentSpan> documents, std::vector<PageEntry> pages);

    std::size_t
    page_count() const noexcept {
        return pages_.size();
    }
    const std::vector<PageEntry>&
    pages() const noexcept {
        return pages_;
    }
    const std::vector<DocumentSpan>&
    documents() const noexcept {
        return documents_;
    }
    const PageEntry&
    page(std::uint32_t global_id) const;

    /// Throws kNotFound when the document is absent.
    const DocumentSpan&
    document(const DocumentId& id) const;
    const DocumentSpan*
    find_document(const DocumentId& id) const;

    std::optional<std::uint32_t>
    global_id(const DocumentId& doc, std::uint32_t page_index) const;

    void
    set_image_path(std::uint32_t global_id, std::string path);

    bool operator==(const CorpusManifest&) const = default;

private:
    std::vector<DocumentSpan> documents_;
    std::vector<PageEntry> pages_;
};

/// Assigns global ids in document order, then page order. Rejects duplicate
/// document ids and documents without pages.
CorpusManifest
flatten_corpus(const std::vector<std::pair<DocumentId, std::uint32_t>>& docs);

struct OpenDomain {
    bool operator==(const OpenDomain&) const = default;
};
struct ClosedDomain {
    DocumentId doc;
    bool operator==(const ClosedDomain&) const = default;
};
using Scope = std::variant<OpenDomain, ClosedDomain>;

struct Query {
    std::string id;
    std::string text;
    MultiVecEmbedding embedding;
    Scope scope = OpenDomain{};
};

struct Hit {
    PageRef page;
    float score = 0.0F;

    bool operator==(const Hit&) const = default;
};

struct RetrievalResult {
    std::string query_id;
    std::vector<Hit> hits;
};

enum class Hops { kSingle, kMulti };

enum class Modality : std::uint8_t { kText, kTable, kImage, kChart, kLayout };

inline constexpr Modality kAllModalities[] = {
    Modality::kImage, Modality::kTable, Modality::kText, Modality::kChart, Modality::kLayout};

std::string_view
hops_name(Hops hops);
Hops
parse_hops(std::string_view name);
std::string_view
modality_name(Modality modality);
Modality
parse_modality(std::string_view name);

/// A gold page reference before it is resolved against a manifest.
struct PageKey {
    DocumentId doc;
    std::uint32_t page_index = 0;

    auto operator<=>(const PageKey&) const = default;
};

struct QAExample {
    std::string id;
    std::string question;
    std::vector<std::string> gold_answers;
    Hops hops = Hops::kSingle;
    std::vector<Modality> modalities;  // sorted, unique; empty = unknown
    std::optional<std::vector<PageKey>> gold_pages;
    std::optional<DocumentId> doc;     // set for closed-domain questions

    bool
    has_modality(Modality m) const;
};

/// Throws kInvalidArgument unless the example satisfies its invariants.
void
validate_example(const QAExample& example);

}  // namespace latepage
