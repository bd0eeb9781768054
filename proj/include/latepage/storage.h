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
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "latepage/core.h"
#include "latepage/embedding_store.h"
#include "latepage/index.h"

namespace latepage {

// Binary layouts are documented byte-for-byte in docs/formats.md. Every
// integer and float is little-endian.

inline constexpr char kStoreMagic[8] = {'M', '3', 'E', 'M', 'B', 'E', 'D', '1'};
inline constexpr char kIndexMagic[8] = {'M', '3', 'I', 'N', 'D', 'E', 'X', '1'};
inline constexpr std::uint32_t kFormatVersion = 1;

/// Bytes before the payload: magic, version, dim, tokens_per_page,
/// page_count, provider id length and provider id.
std::size_t
store_header_size(std::string_view provider_id);

std::vector<std::byte>
encode_store(const EmbeddingStore& store);
/// Distinct error kinds for bad magic, version, truncation and checksum.
EmbeddingStore
decode_store(std::span<const std::byte> bytes);

void
write_store(const std::filesystem::path& path, const EmbeddingStore& store);
EmbeddingStore
read_store(const std::filesystem::path& path);

std::string
manifest_to_json(const CorpusManifest& manifest);
CorpusManifest
manifest_from_json(std::string_view text);
void
write_manifest(const std::filesystem::path& path, const CorpusManifest& manifest);
CorpusManifest
read_manifest(const std::filesystem::path& path);

std::vector<std::byte>
encode_index(const PageIndex& index);
PageIndex
decode_index(std::span<const std::byte> bytes, std::shared_ptr<const CorpusManifest> manifest,
             std::shared_ptr<const EmbeddingStore> store);

void
save_index(const std::filesystem::path& path, const PageIndex& index);
/// Fails before any search when the attached corpus does not match the one
/// the index was built over (dim, tokens_per_page, page count, store CRC).
PageIndex
load_index(const std::filesystem::path& path, std::shared_ptr<const CorpusManifest> manifest,
           std::shared_ptr<const EmbeddingStore> store);

std::string
example_to_json(const QAExample& example);
QAExample
example_from_json(std::string_view line);
/// JSON Lines, one example per line; blank lines are skipped.
std::vector<QAExample>
read_examples(const std::filesystem::path& path);
void
write_examples(const std::filesystem::path& path, const std::vector<QAExample>& examples);

/// Writes to a sibling temporary file, then renames over `path`.
void
atomic_write(const std::filesystem::path& path, std::span<const std::byte> bytes);
void
atomic_write_text(const std::filesystem::path& path, std::string_view text);

std::vector<std::byte>
read_file(const std::filesystem::path& path);
std::string
read_text(const std::filesystem::path& path);

}  // namespace latepage
