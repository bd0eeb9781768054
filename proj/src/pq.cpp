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

#include "latepage/pq.h"

#include <string>

#include "latepage/error.h"
#include "latepage/scoring.h"

namespace latepage {

ProductQuantizer::ProductQuantizer(std::size_t dim, std::size_t m, std::size_t nbits)
    : dim_(dim), m_(m), nbits_(nbits) {
    if (m == 0 || dim == 0 || dim % m != 0) {
        throw Error(ErrorKind::kConfig,
                    "PQ needs m >= 1 dividing d (d=" + std::to_string(dim) + ", m=" + std::to_string(m) + ")");
    }
    if (nbits < 1 || nbits > 8) {
        throw Error(ErrorKind::kConfig, "PQ nbits must be in [1, 8], got " + std::to_string(nbits));
    }
    ksub_ = std::size_t{1} << nbits;
    dsub_ = dim / m;
    codebooks_.assign(m_ * ksub_ * dsub_, 0.0F);
}

void
ProductQuantizer::train(std::span<const float> vectors, const KMeansOptions& kmeans) {
    const std::size_t n = vectors.size() / dim_;
    if (n < ksub_) {
        throw Error(ErrorKind::kConfig, "PQ training needs at least 2^nbits = " + std::to_string(ksub_) +
                                            " vectors, got " + std::to_string(n));
    }
    std::vector<float> sub(n * dsub_);
    for (std::size_t s = 0; s < m_; ++s) {
        for (std::size_t i = 0; i < n; ++i) {
            const float* src = vectors.data() + i * dim_ + s * dsub_;
            std::copy_n(src, dsub_, sub.data() + i * dsub_);
        }
        KMeansOptions opts = kmeans;
        opts.k = ksub_;
        opts.seed = kmeans.seed + 1000003ULL * (s + 1);
        KMeansResult r = kmeans_train(sub, dsub_, opts);
        std::copy(r.centroids.begin(), r.centroids.end(), codebooks_.begin() + s * ksub_ * dsub_);
    }
}

void
ProductQuantizer::encode(std::span<const float> vector, std::uint8_t* code) const {
    for (std::size_t s = 0; s < m_; ++s) {
        std::span<const float> seg(vector.data() + s * dsub_, dsub_);
        std::span<const float> book(codebooks_.data() + s * ksub_ * dsub_, ksub_ * dsub_);
        code[s] = static_cast<std::uint8_t>(nearest_l2(seg, book, ksub_));
    }
}

void
ProductQuantizer::decode(const std::uint8_t* code, std::span<float> out) const {
    for (std::size_t s = 0; s < m_; ++s) {
        auto c = centroid(s, code[s]);
        std::copy(c.begin(), c.end(), out.begin() + static_cast<std::ptrdiff_t>(s * dsub_));
    }
}

void
ProductQuantizer::compute_ip_table(std::span<const float> query, float* table) const {
    for (std::size_t s = 0; s < m_; ++s) {
        std::span<const float> seg(query.data() + s * dsub_, dsub_);
        for (std::size_t c = 0; c < ksub_; ++c) {
            table[s * ksub_ + c] = dot_reference(seg, centroid(s, c));
        }
    }
}

void
ProductQuantizer::set_codebooks(std::vector<float> codebooks) {
    if (codebooks.size() != m_ * ksub_ * dsub_) {
        throw Error(ErrorKind::kFormat, "PQ codebook size mismatch");
    }
    codebooks_ = std::move(codebooks);
}

float
adc_score(std::span<const float> query_row, std::span<const std::uint8_t> code, const ProductQuantizer& pq,
          std::span<const float> centroid) {
    if (query_row.size() != pq.dim() || centroid.size() != pq.dim()) {
        throw Error(ErrorKind::kDimensionMismatch, "adc_score: query/centroid dim " +
                                                       std::to_string(query_row.size()) + "/" +
                                                       std::to_string(centroid.size()) + " vs PQ dim " +
                                                       std::to_string(pq.dim()));
    }
    if (code.size() != pq.code_size()) {
        throw Error(ErrorKind::kDimensionMismatch, "adc_score: code length " + std::to_string(code.size()) +
                                                       " vs m=" + std::to_string(pq.m()));
    }
    float residual = 0.0F;
    for (std::size_t s = 0; s < pq.m(); ++s) {
        std::span<const float> seg(query_row.data() + s * pq.dsub(), pq.dsub());
        residual += dot_reference(seg, pq.centroid(s, code[s]));
    }
    return dot_reference(query_row, centroid) + residual;
}

}  // namespace latepage
