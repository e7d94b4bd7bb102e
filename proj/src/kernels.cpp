#include "uclm/kernels.hpp"

namespace uclm {

Exec& default_exec_ref() {
    static Exec e = Exec::parallel;
    return e;
}

namespace kernels {

namespace {

inline void nearest_one(const float* p, const float* centroids, size_t c,
                        size_t d, uint32_t& best, double& best_dist) {
    best = 0;
    best_dist = l2sq(p, centroids, d);
    for (size_t j = 1; j < c; ++j) {
        double dist = l2sq(p, centroids + j * d, d);
        if (dist < best_dist) {
            best_dist = dist;
            best = static_cast<uint32_t>(j);
        }
    }
}

inline void encode_one(const float* v, size_t d, const float* codebook,
                       size_t m, size_t s, uint8_t* code) {
    size_t dsub = d / m;
    for (size_t j = 0; j < m; ++j) {
        const float* slice = v + j * dsub;
        const float* cents = codebook + j * s * dsub;
        uint32_t best;
        double best_dist;
        nearest_one(slice, cents, s, dsub, best, best_dist);
        code[j] = static_cast<uint8_t>(best);
    }
}

inline double row_dot(const double* row, const double* v, size_t cols) {
    double acc = 0.0;
    for (size_t i = 0; i < cols; ++i) acc += row[i] * v[i];
    return acc;
}

} // namespace

void nearest_centroid_serial(const float* points, size_t n,
                             const float* centroids, size_t c, size_t d,
                             uint32_t* assign, double* dist) {
    for (size_t i = 0; i < n; ++i)
        nearest_one(points + i * d, centroids, c, d, assign[i], dist[i]);
}

void nearest_centroid_omp(const float* points, size_t n,
                          const float* centroids, size_t c, size_t d,
                          uint32_t* assign, double* dist) {
#pragma omp parallel for schedule(static) if (n * c * d > 1 << 14)
    for (size_t i = 0; i < n; ++i)
        nearest_one(points + i * d, centroids, c, d, assign[i], dist[i]);
}

void nearest_centroid(const float* points, size_t n,
                      const float* centroids, size_t c, size_t d,
                      uint32_t* assign, double* dist, Exec ex) {
    if (ex == Exec::parallel)
        nearest_centroid_omp(points, n, centroids, c, d, assign, dist);
    else
        nearest_centroid_serial(points, n, centroids, c, d, assign, dist);
}

void pairwise_sqdist_serial(const float* query, const float* points,
                            size_t n, size_t d, double* out) {
    for (size_t i = 0; i < n; ++i) out[i] = l2sq(query, points + i * d, d);
}

void pairwise_sqdist_omp(const float* query, const float* points,
                         size_t n, size_t d, double* out) {
#pragma omp parallel for schedule(static) if (n * d > 1 << 14)
    for (size_t i = 0; i < n; ++i) out[i] = l2sq(query, points + i * d, d);
}

void pairwise_sqdist(const float* query, const float* points,
                     size_t n, size_t d, double* out, Exec ex) {
    if (ex == Exec::parallel)
        pairwise_sqdist_omp(query, points, n, d, out);
    else
        pairwise_sqdist_serial(query, points, n, d, out);
}

void adc_scan_serial(const double* tables, size_t m, size_t s,
                     const uint8_t* codes, size_t n, double* out) {
    for (size_t i = 0; i < n; ++i) {
        const uint8_t* code = codes + i * m;
        double acc = 0.0;
        for (size_t j = 0; j < m; ++j) acc += tables[j * s + code[j]];
        out[i] = acc;
    }
}

void adc_scan_omp(const double* tables, size_t m, size_t s,
                  const uint8_t* codes, size_t n, double* out) {
#pragma omp parallel for schedule(static) if (n * m > 1 << 14)
    for (size_t i = 0; i < n; ++i) {
        const uint8_t* code = codes + i * m;
        double acc = 0.0;
        for (size_t j = 0; j < m; ++j) acc += tables[j * s + code[j]];
        out[i] = acc;
    }
}

void adc_scan(const double* tables, size_t m, size_t s,
              const uint8_t* codes, size_t n, double* out, Exec ex) {
    if (ex == Exec::parallel)
        adc_scan_omp(tables, m, s, codes, n, out);
    else
        adc_scan_serial(tables, m, s, codes, n, out);
}

void pq_encode_batch_serial(const float* vecs, size_t n, size_t d,
                            const float* codebook, size_t m, size_t s,
                            uint8_t* codes) {
    for (size_t i = 0; i < n; ++i)
        encode_one(vecs + i * d, d, codebook, m, s, codes + i * m);
}

void pq_encode_batch_omp(const float* vecs, size_t n, size_t d,
                         const float* codebook, size_t m, size_t s,
                         uint8_t* codes) {
#pragma omp parallel for schedule(static) if (n * s * d > 1 << 14)
    for (size_t i = 0; i < n; ++i)
        encode_one(vecs + i * d, d, codebook, m, s, codes + i * m);
}

void pq_encode_batch(const float* vecs, size_t n, size_t d,
                     const float* codebook, size_t m, size_t s,
                     uint8_t* codes, Exec ex) {
    if (ex == Exec::parallel)
        pq_encode_batch_omp(vecs, n, d, codebook, m, s, codes);
    else
        pq_encode_batch_serial(vecs, n, d, codebook, m, s, codes);
}

void matvec_rows_serial(const double* mat, size_t rows, size_t cols,
                        const double* v, double* out) {
    for (size_t r = 0; r < rows; ++r) out[r] = row_dot(mat + r * cols, v, cols);
}

void matvec_rows_omp(const double* mat, size_t rows, size_t cols,
                     const double* v, double* out) {
#pragma omp parallel for schedule(static) if (rows * cols > 1 << 14)
    for (size_t r = 0; r < rows; ++r) out[r] = row_dot(mat + r * cols, v, cols);
}

void matvec_rows(const double* mat, size_t rows, size_t cols,
                 const double* v, double* out, Exec ex) {
    if (ex == Exec::parallel)
        matvec_rows_omp(mat, rows, cols, v, out);
    else
        matvec_rows_serial(mat, rows, cols, v, out);
}

} // namespace kernels
} // namespace uclm
