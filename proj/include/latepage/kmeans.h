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

namespace latepage {

struct KMeansOptions {
    std::size_t k = 1;
    std::uint32_t iters = 20;
    std::uint64_t seed = 1234;
    std::uint32_t restarts = 1;
};

struct KMeansResult {
    std::vector<float> centroids;  // k x dim, row-major
    double objective = 0.0;        // sum of squared L2 distances to assigned centroid
};

/// Lloyd's algorithm with L2 assignment over `n` row-major vectors of `dim`
/// floats. Initial centroids are distinct sample points drawn with `seed`;
/// a cluster that empties is re-seeded with the point of the largest cluster
/// farthest from that cluster's centroid. Deterministic for a fixed seed.
/// Throws kInvalidArgument when k exceeds the sample size.
KMeansResult
kmeans_train(std::span<const float> vectors, std::size_t dim, const KMeansOptions& options);

/// Index of the nearest centroid in squared L2 distance (ties to lowest id).
std::size_t
nearest_l2(std::span<const float> vector, std::span<const float> centroids, std::size_t k);

/// Partial Fisher-Yates draw of `count` distinct indices from [0, n).
std::vector<std::uint32_t>
sample_indices(std::size_t n, std::size_t count, std::uint64_t seed);

}  // namespace latepage
