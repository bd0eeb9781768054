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

#include "latepage/kmeans.h"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "latepage/error.h"
#include "latepage/scoring.h"

namespace latepage {

namespace {

// Column-major copy of the centroids plus their squared norms, so that one
// dot_columns call yields every ||c||^2 - 2 x.c for a point.
struct CentroidBlock {
    std::vector<float> transposed;
    std::vector<float> norms;

    CentroidBlock(const std::vector<float>& centroids, std::size_t k, std::size_t dim) {
        transpose_into(EmbeddingView(centroids.data(), k, dim), transposed);
        norms.resize(k);
        for (std::size_t j = 0; j < k; ++j) {
            std::span<const float> c(centroids.data() + j * dim, dim);
            norms[j] = dot_reference(c, c);
        }
    }
};

struct Assignment {
    std::vector<std::uint32_t> labels;
    std::vector<float> distances;
    double objective = 0.0;
};

Assignment
assign(std::span<const float> vectors, std::size_t n, std::size_t dim, const std::vector<float>& centroids,
       std::size_t k) {
    CentroidBlock block(centroids, k, dim);
    Assignment out;
    out.labels.resize(n);
    out.distances.resize(n);
    std::vector<float> dots(k);
    for (std::size_t i = 0; i < n; ++i) {
        std::span<const float> x(vectors.data() + i * dim, dim);
        dot_columns(x, block.transposed.data(), k, k, dots.data());
        std::size_t best = 0;
        float best_d = block.norms[0] - 2.0F * dots[0];
        for (std::size_t j = 1; j < k; ++j) {
            const float d = block.norms[j] - 2.0F * dots[j];
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        out.labels[i] = static_cast<std::uint32_t>(best);
        const float dist = std::max(0.0F, dot_reference(x, x) + best_d);
        out.distances[i] = dist;
        out.objective += dist;
    }
    return out;
}

KMeansResult
run_once(std::span<const float> vectors, std::size_t n, std::size_t dim, const KMeansOptions& options,
         std::uint64_t seed) {
    const std::size_t k = options.k;
    std::vector<float> centroids(k * dim);
    const auto init = sample_indices(n, k, seed);
    for (std::size_t j = 0; j < k; ++j) {
        std::copy_n(vectors.data() + static_cast<std::size_t>(init[j]) * dim, dim, centroids.data() + j * dim);
    }

    std::vector<std::uint32_t> previous;
    std::vector<double> sums(k * dim);
    std::vector<std::size_t> counts(k);
    for (std::uint32_t iter = 0; iter < std::max<std::uint32_t>(1, options.iters); ++iter) {
        Assignment a = assign(vectors, n, dim, centroids, k);
        if (a.labels == previous) {
            break;
        }
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t l = a.labels[i];
            ++counts[l];
            const float* x = vectors.data() + i * dim;
            for (std::size_t c = 0; c < dim; ++c) {
                sums[l * dim + c] += x[c];
            }
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (counts[j] == 0) {
                continue;
            }
            for (std::size_t c = 0; c < dim; ++c) {
                centroids[j * dim + c] = static_cast<float>(sums[j * dim + c] / static_cast<double>(counts[j]));
            }
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (counts[j] != 0) {
                continue;
            }
            const std::size_t largest = static_cast<std::size_t>(
                std::max_element(counts.begin(), counts.end()) - counts.begin());
            std::size_t far = n;
            float far_d = -1.0F;
            for (std::size_t i = 0; i < n; ++i) {
                if (a.labels[i] == largest && a.distances[i] > far_d) {
                    far_d = a.distances[i];
                    far = i;
                }
            }
            if (far == n) {
                break;
            }
            std::copy_n(vectors.data() + far * dim, dim, centroids.data() + j * dim);
            a.labels[far] = static_cast<std::uint32_t>(j);
            a.distances[far] = 0.0F;
            --counts[largest];
            counts[j] = 1;
        }
        previous = std::move(a.labels);
    }
    KMeansResult result;
    result.objective = assign(vectors, n, dim, centroids, k).objective;
    result.centroids = std::move(centroids);
    return result;
}

}  // namespace

std::vector<std::uint32_t>
sample_indices(std::size_t n, std::size_t count, std::uint64_t seed) {
    if (count > n) {
        throw Error(ErrorKind::kInvalidArgument,
                    "cannot draw " + std::to_string(count) + " samples from " + std::to_string(n));
    }
    std::vector<std::uint32_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0U);
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
        std::swap(perm[i], perm[j]);
    }
    perm.resize(count);
    return perm;
}

std::size_t
nearest_l2(std::span<const float> vector, std::span<const float> centroids, std::size_t k) {
    const std::size_t dim = vector.size();
    std::size_t best = 0;
    float best_d = std::numeric_limits<float>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
        float d = 0.0F;
        const float* c = centroids.data() + j * dim;
        for (std::size_t i = 0; i < dim; ++i) {
            const float diff = vector[i] - c[i];
            d += diff * diff;
        }
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return best;
}

KMeansResult
kmeans_train(std::span<const float> vectors, std::size_t dim, const KMeansOptions& options) {
    if (dim == 0 || vectors.size() % dim != 0) {
        throw Error(ErrorKind::kDimensionMismatch, "k-means input is not a whole number of vectors");
    }
    const std::size_t n = vectors.size() / dim;
    if (options.k == 0) {
        throw Error(ErrorKind::kInvalidArgument, "k-means needs k >= 1");
    }
    if (options.k > n) {
        throw Error(ErrorKind::kInvalidArgument, "k-means with k=" + std::to_string(options.k) +
                                                     " needs at least that many samples, got " +
                                                     std::to_string(n));
    }
    KMeansResult best;
    const std::uint32_t restarts = std::max<std::uint32_t>(1, options.restarts);
    for (std::uint32_t r = 0; r < restarts; ++r) {
        KMeansResult run = run_once(vectors, n, dim, options, options.seed + r * 0x9E3779B97F4A7C15ULL);
        if (r == 0 || run.objective < best.objective) {
            best = std::move(run);
        }
    }
    return best;
}

}  // namespace latepage
