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
#include <memory>
#include <span>

namespace latepage {

/// CRC-64/XZ (ECMA-182 polynomial, reflected, all-ones init and xorout).
class Crc64 {
public:
    Crc64();
    ~Crc64();
    Crc64(const Crc64&) = delete;
    Crc64&
    operator=(const Crc64&) = delete;

    void
    update(const void* data, std::size_t size);
    std::uint64_t
    value() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::uint64_t
crc64(std::span<const std::byte> bytes);

}  // namespace latepage
