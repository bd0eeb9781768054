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
#include <vector>

#include "latepage/kmeans.h"

namespace latepage {

/// Product quantizer for inner-product search: d is split into m contiguous
/// sub-spaces of d/m coordinates, each with 2^nbits centroids. Codes take one
/// byte per sub-space.
class ProductQuantizer {
public:
    ProductQuantizer() = default;
    ProductQuantizer(std::size_t dim, std::size_t m, std::size_t nbits);

    /// Trains every sub-codebook with k-means on `vectors` (n x dim).
    void
    train(std::span<const float> vectors, const KMeansOptions& kmeans);

    void
    encode(std::span<const float> vector, std::uint8_t* code) const;
    void
    decode(const std::uint8_t* code, std::span<float> out) const;

    /// table[s * ksub + c] = query sub-segment s . codebook[s][c]
    void
    compute_ip_table(std::span<const float> query, float* table) const;

    std::size_t
    dim() const noexcept {
        return dim_;
    }
    std::size_t
    m() const noexcept {
        return m_;
    }
    std::size_t
    nbits() const noexcept {
        return nbits_;
    }
    std::size_t
    ksub() const noexcept {
        return ksub_;
    }
    std::size_t
    dsub() const noexcept {
        return dsub_;
    }
    std::size_t
    code_size() const noexcept {
        return m_;
    }

    /// m x ksub x dsub, row-major.
    const std::vector<float>&
    codebooks() const noexcept {
        return codebooks_;
    }
    void
    set_codebooks(std::vector<float> codebooks);

    std::span<const float>
    centroid(std::size_t sub, std::size_t code) const {
        return {codebooks_.data() + (sub * ksub_ + code) * dsub_, dsub_};
    }

    bool operator==(const ProductQuantizer&) const = default;

private:
    std::size_t dim_ = 0;
    std::size_t m_ = 0;
    std::size_t nbits_ = 0;
    std::size_t ksub_ = 0;
    std::size_t dsub_ = 0;
    std::vector<float> codebooks_;
};

/// Asymmetric inner product of a raw query row against a residual-encoded
/// vector: query . centroid + sum over sub-spaces of query segment . codeword.
/// The sub-space terms are summed first in ascending order, then added to the
/// centroid term; IVFPQ search uses the same order.
float
adc_score(std::span<const float> query_row, std::span<const std::uint8_t> code, const ProductQuantizer& pq,
          std::span<const float> centroid);

}  // namespace latepage
