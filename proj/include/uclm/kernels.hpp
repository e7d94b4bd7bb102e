#pragma once

#include <cstddef>
#include <cstdint>

#include "uclm/exec.hpp"

// Data-parallel inner loops shared by the quantizer, the index and the model.
// Each kernel exists in a serial reference form and an OpenMP form; both
// compute every output element with the same scalar operation order, so their
// results are bit-identical (reductions are never split across threads).
// The *_serial/*_omp variants stay public for the tests and the benchmark.

namespace uclm::kernels {

// squared L2 distance, fp32 inputs, fp64 accumulator
inline double l2sq(const float* a, const float* b, size_t d) {
    double acc = 0.0;
    for (size_t i = 0; i < d; ++i) {
        double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += diff * diff;
    }
    return acc;
}

inline double dot_f32(const float* a, const float* b, size_t d) {
    double acc = 0.0;
    for (size_t i = 0; i < d; ++i)
        acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return acc;
}

// argmin over centroids per point; ties break to the lower centroid id
void nearest_centroid_serial(const float* points, size_t n,
                             const float* centroids, size_t c, size_t d,
                             uint32_t* assign, double* dist);
void nearest_centroid_omp(const float* points, size_t n,
                          const float* centroids, size_t c, size_t d,
                          uint32_t* assign, double* dist);
void nearest_centroid(const float* points, size_t n,
                      const float* centroids, size_t c, size_t d,
                      uint32_t* assign, double* dist, Exec ex);

// out[i] = ||query - points[i]||^2
void pairwise_sqdist_serial(const float* query, const float* points,
                            size_t n, size_t d, double* out);
void pairwise_sqdist_omp(const float* query, const float* points,
                         size_t n, size_t d, double* out);
void pairwise_sqdist(const float* query, const float* points,
                     size_t n, size_t d, double* out, Exec ex);

// out[i] = sum_j tables[j*s + codes[i*m + j]]
void adc_scan_serial(const double* tables, size_t m, size_t s,
                     const uint8_t* codes, size_t n, double* out);
void adc_scan_omp(const double* tables, size_t m, size_t s,
                  const uint8_t* codes, size_t n, double* out);
void adc_scan(const double* tables, size_t m, size_t s,
              const uint8_t* codes, size_t n, double* out, Exec ex);

// PQ encode a batch: codebook laid out [subspace][centroid][dim]
void pq_encode_batch_serial(const float* vecs, size_t n, size_t d,
                            const float* codebook, size_t m, size_t s,
                            uint8_t* codes);
void pq_encode_batch_omp(const float* vecs, size_t n, size_t d,
                         const float* codebook, size_t m, size_t s,
                         uint8_t* codes);
void pq_encode_batch(const float* vecs, size_t n, size_t d,
                     const float* codebook, size_t m, size_t s,
                     uint8_t* codes, Exec ex);

// out[r] = dot(mat[r], v): dense fp64 row scores (softmax logits, gates)
void matvec_rows_serial(const double* mat, size_t rows, size_t cols,
                        const double* v, double* out);
void matvec_rows_omp(const double* mat, size_t rows, size_t cols,
                     const double* v, double* out);
void matvec_rows(const double* mat, size_t rows, size_t cols,
                 const double* v, double* out, Exec ex);

} // namespace uclm::kernels
