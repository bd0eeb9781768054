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

#include "latepage/crc64.h"

#include <boost/crc.hpp>

namespace latepage {

using Crc64Xz = boost::crc_optimal<64, 0x42F0E1EBA9EA3693ULL, 0xFFFFFFFFFFFFFFFFULL,
                                   0xFFFFFFFFFFFFFFFFULL, true, true>;

struct Crc64::Impl {
    Crc64Xz crc;
};

Crc64::Crc64() : impl_(std::make_unique<Impl>()) {
}

Crc64::~Crc64() = default;

void
Crc64::update(const void* data, std::size_t size) {
    impl_->crc.process_bytes(data, size);
}

std::uint64_t
Crc64::value() const {
    return impl_->crc.checksum();
}

std::uint64_t
crc64(std::span<const std::byte> bytes) {
    Crc64 crc;
    crc.update(bytes.data(), bytes.size());
    return crc.value();
}

}  // namespace latepage
