#pragma once

#include <cstdint>
#include <vector>

#include "uclm/exec.hpp"

namespace uclm {

// Centroid math runs on fp32 vectors with fp64 accumulators for distances
// and objectives.

struct KMeansModel {
    std::vector<float> centroids;  // c x d
    uint32_t c = 0;
    uint32_t d = 0;
    double objective = 0.0;        // within-cluster sum of squares at the final assignment

    const float* centroid(uint32_t j) const { return centroids.data() + size_t(j) * d; }
};

// Lloyd iterations with k-means++ seeding. Empty clusters are re-seeded to
// the point currently farthest from its centroid. The objective is checked
// to be non-increasing after every iteration. iters counts update rounds;
// iters=0 returns the seeded initialization.
KMeansModel kmeans(const float* points, size_t n, size_t d, uint32_t c,
                   uint32_t iters, uint64_t seed,
                   std::vector<uint32_t>* out_assign = nullptr,
                   std::vector<double>* out_objectives = nullptr,
                   Exec ex = default_exec());

struct PqCodebook {
    uint32_t m = 0;      // sub-quantizers
    uint32_t b = 0;      // bits per sub-index
    uint32_t s = 0;      // centroids per subspace, 2^b
    uint32_t d = 0;      // full dimension, m * dsub
    uint32_t dsub = 0;
    std::vector<float> centroids;  // m x s x dsub

    const float* sub_centroid(uint32_t j, uint32_t i) const {
        return centroids.data() + (size_t(j) * s + i) * dsub;
    }
};

using PqCode = std::vector<uint8_t>;  // m sub-indices, b <= 8

// Independent k-means per subspace on the residual slices.
PqCodebook pq_train(const float* residuals, size_t n, size_t d,
                    uint32_t m, uint32_t b, uint32_t iters, uint64_t seed,
                    Exec ex = default_exec());

// Per-subspace argmin in L2; ties break to the lowest index.
PqCode pq_encode(const PqCodebook& cb, const float* vec);

std::vector<float> pq_decode(const PqCodebook& cb, const uint8_t* code);

// table[j*s + i] = || query slice j - centroid i of subspace j ||^2.
// For any code, the table sum equals the squared distance to the decoded
// vector exactly (both sides accumulate in fp64).
std::vector<double> adc_tables(const PqCodebook& cb, const float* query);

// inner-product variant: table[j*s + i] = <query slice j, centroid i>
std::vector<double> adc_tables_ip(const PqCodebook& cb, const float* query);

} // namespace uclm
