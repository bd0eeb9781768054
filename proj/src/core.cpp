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

#include "latepage/core.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "latepage/error.h"

namespace latepage {

const char*
error_kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::kInvalidArgument:
            return "invalid_argument";
        case ErrorKind::kDimensionMismatch:
            return "dimension_mismatch";
        case ErrorKind::kDuplicateId:
            return "duplicate_id";
        case ErrorKind::kNotFound:
            return "not_found";
        case ErrorKind::kIncomplete:
            return "incomplete";
        case ErrorKind::kBadMagic:
            return "bad_magic";
        case ErrorKind::kVersionMismatch:
            return "version_mismatch";
        case ErrorKind::kTruncated:
            return "truncated";
        case ErrorKind::kChecksumMismatch:
            return "checksum_mismatch";
        case ErrorKind::kFormat:
            return "format";
        case ErrorKind::kIo:
            return "io";
        case ErrorKind::kTransport:
            return "transport";
        case ErrorKind::kConfig:
            return "config";
    }
    return "unknown";
}

DocumentId::DocumentId(std::string value) : value_(std::move(value)) {
    if (value_.empty()) {
        throw Error(ErrorKind::kInvalidArgument, "document id must be non-empty");
    }
}

MultiVecEmbedding::MultiVecEmbedding(std::size_t rows, std::size_t dim, std::vector<float> data)
    : rows_(rows), dim_(dim), data_(std::move(data)) {
    if (rows_ == 0 || dim_ == 0) {
        throw Error(ErrorKind::kInvalidArgument, "embedding needs at least one row and one dimension");
    }
    if (data_.size() != rows_ * dim_) {
        throw Error(ErrorKind::kDimensionMismatch,
                    "embedding data has " + std::to_string(data_.size()) + " values, expected " +
                        std::to_string(rows_) + "x" + std::to_string(dim_));
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
        if (!std::isfinite(data_[i])) {
            throw Error(ErrorKind::kInvalidArgument,
                        "embedding row " + std::to_string(i / dim_) + " has a non-finite entry");
        }
    }
}

MultiVecEmbedding
MultiVecEmbedding::from_rows(const std::vector<std::vector<float>>& rows) {
    if (rows.empty()) {
        throw Error(ErrorKind::kInvalidArgument, "embedding needs at least one row");
    }
    const std::size_t dim = rows.front().size();
    std::vector<float> data;
    data.reserve(rows.size() * dim);
    for (const auto& r : rows) {
        if (r.size() != dim) {
            throw Error(ErrorKind::kDimensionMismatch, "ragged embedding rows");
        }
        data.insert(data.end(), r.begin(), r.end());
    }
    return {rows.size(), dim, std::move(data)};
}

CorpusManifest::CorpusManifest(std::vector<DocumentSpan> documents, std::vector<PageEntry> pages)
    : documents_(std::move(documents)), pages_(std::move(pages)) {
    std::uint32_t next = 0;
    std::set<DocumentId> seen;
    for (const auto& doc : documents_) {
        if (!seen.insert(doc.id).second) {
            throw Error(ErrorKind::kDuplicateId, "duplicate document id: " + doc.id.str());
        }
        if (doc.page_count == 0) {
            throw Error(ErrorKind::kInvalidArgument, "document has no pages: " + doc.id.str());
        }
        if (doc.first_global_id != next) {
            throw Error(ErrorKind::kInvalidArgument, "document pages are not contiguous: " + doc.id.str());
        }
        for (std::uint32_t p = 0; p < doc.page_count; ++p) {
            const std::uint32_t g = next + p;
            if (g >= pages_.size() || pages_[g].ref.global_id != g || pages_[g].ref.doc != doc.id ||
                pages_[g].ref.page_index != p) {
                throw Error(ErrorKind::kInvalidArgument,
                            "page table inconsistent at global id " + std::to_string(g));
            }
        }
        next += doc.page_count;
    }
    if (next != pages_.size()) {
        throw Error(ErrorKind::kInvalidArgument, "page table has pages outside any document");
    }
}

const PageEntry&
CorpusManifest::page(std::uint32_t global_id) const {
    if (global_id >= pages_.size()) {
        throw Error(ErrorKind::kNotFound, "global id out of range: " + std::to_string(global_id));
    }
    return pages_[global_id];
}

const DocumentSpan*
CorpusManifest::find_document(const DocumentId& id) const {
    auto it = std::find_if(documents_.begin(), documents_.end(),
                           [&](const DocumentSpan& d) { return d.id == id; });
    return it == documents_.end() ? nullptr : &*it;
}

const DocumentSpan&
CorpusManifest::document(const DocumentId& id) const {
    const DocumentSpan* doc = find_document(id);
    if (doc == nullptr) {
        throw Error(ErrorKind::kNotFound, "document not in manifest: " + id.str());
    }
    return *doc;
}

std::optional<std::uint32_t>
CorpusManifest::global_id(const DocumentId& doc, std::uint32_t page_index) const {
    const DocumentSpan* span = find_document(doc);
    if (span == nullptr || page_index >= span->page_count) {
        return std::nullopt;
    }
    return span->first_global_id + page_index;
}

void
CorpusManifest::set_image_path(std::uint32_t global_id, std::string path) {
    if (global_id >= pages_.size()) {
        throw Error(ErrorKind::kNotFound, "global id out of range: " + std::to_string(global_id));
    }
    pages_[global_id].image_path = std::move(path);
}

CorpusManifest
flatten_corpus(const std::vector<std::pair<DocumentId, std::uint32_t>>& docs) {
    std::vector<DocumentSpan> spans;
    std::vector<PageEntry> pages;
    std::set<DocumentId> seen;
    std::uint64_t total = 0;
    for (const auto& [id, count] : docs) {
        if (!seen.insert(id).second) {
            throw Error(ErrorKind::kDuplicateId, "duplicate document id: " + id.str());
        }
        if (count == 0) {
            throw Error(ErrorKind::kInvalidArgument, "document has no pages: " + id.str());
        }
        total += count;
        if (total > UINT32_MAX) {
            throw Error(ErrorKind::kInvalidArgument, "corpus exceeds 2^32 pages");
        }
    }
    pages.reserve(total);
    std::uint32_t next = 0;
    for (const auto& [id, count] : docs) {
        spans.push_back({id, next, count});
        for (std::uint32_t p = 0; p < count; ++p) {
            pages.push_back({PageRef{id, p, next + p}, {}});
        }
        next += count;
    }
    return {std::move(spans), std::move(pages)};
}

std::string_view
hops_name(Hops hops) {
    return hops == Hops::kSingle ? "single" : "multi";
}

Hops
parse_hops(std::string_view name) {
    if (name == "single" || name == "single-hop" || name == "SingleHop") {
        return Hops::kSingle;
    }
    if (name == "multi" || name == "multi-hop" || name == "MultiHop") {
        return Hops::kMulti;
    }
    throw Error(ErrorKind::kFormat, "unknown hops value: " + std::string(name));
}

std::string_view
modality_name(Modality modality) {
    switch (modality) {
        case Modality::kText:
            return "text";
        case Modality::kTable:
            return "table";
        case Modality::kImage:
            return "image";
        case Modality::kChart:
            return "chart";
        case Modality::kLayout:
            return "layout";
    }
    return "unknown";
}

Modality
parse_modality(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    for (Modality m : kAllModalities) {
        if (modality_name(m) == lower) {
            return m;
        }
    }
    throw Error(ErrorKind::kFormat, "unknown modality: " + std::string(name));
}

bool
QAExample::has_modality(Modality m) const {
    return std::find(modalities.begin(), modalities.end(), m) != modalities.end();
}

void
validate_example(const QAExample& example) {
    if (example.id.empty()) {
        throw Error(ErrorKind::kInvalidArgument, "example id must be non-empty");
    }
    if (example.gold_answers.empty()) {
        throw Error(ErrorKind::kInvalidArgument, "example " + example.id + " has no gold answers");
    }
    if (example.gold_pages && example.gold_pages->empty()) {
        throw Error(ErrorKind::kInvalidArgument, "example " + example.id + " has an empty gold page list");
    }
    if (std::adjacent_find(example.modalities.begin(), example.modalities.end(), std::greater_equal<>()) !=
        example.modalities.end()) {
        throw Error(ErrorKind::kInvalidArgument, "example " + example.id + " modalities must be sorted and unique");
    }
}

}  // namespace latepage
