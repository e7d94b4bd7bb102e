#include "uclm/quant.hpp"

#include <cmath>

#include "uclm/error.hpp"
#include "uclm/kernels.hpp"
#include "uclm/rng.hpp"

namespace uclm {

namespace {

// k-means++: first centroid uniform, then proportional to the squared
// distance to the closest chosen centroid.
std::vector<float> kmeanspp_init(const float* points, size_t n, size_t d,
                                 uint32_t c, Rng& rng) {
    std::vector<float> centroids(size_t(c) * d);
    std::vector<double> min_dist(n);

    size_t first = rng.next_below(n);
    std::copy(points + first * d, points + first * d + d, centroids.begin());
    for (size_t i = 0; i < n; ++i)
        min_dist[i] = kernels::l2sq(points + i * d, centroids.data(), d);

    for (uint32_t j = 1; j < c; ++j) {
        double total = 0.0;
        for (size_t i = 0; i < n; ++i) total += min_dist[i];
        size_t pick;
        if (total <= 0.0) {
            // all remaining points coincide with chosen centroids
            pick = rng.next_below(n);
        } else {
            double target = rng.next_double() * total;
            double acc = 0.0;
            pick = n - 1;
            for (size_t i = 0; i < n; ++i) {
                acc += min_dist[i];
                if (acc > target) { pick = i; break; }
            }
        }
        float* cj = centroids.data() + size_t(j) * d;
        std::copy(points + pick * d, points + pick * d + d, cj);
        for (size_t i = 0; i < n; ++i) {
            double dist = kernels::l2sq(points + i * d, cj, d);
            if (dist < min_dist[i]) min_dist[i] = dist;
        }
    }
    return centroids;
}

} // namespace

KMeansModel kmeans(const float* points, size_t n, size_t d, uint32_t c,
                   uint32_t iters, uint64_t seed,
                   std::vector<uint32_t>* out_assign,
                   std::vector<double>* out_objectives, Exec ex) {
    require(d > 0, "kmeans: zero-dimensional input");
    require(c > 0, "kmeans: need at least one centroid");
    require(n >= c, "kmeans: fewer points than centroids");

    Rng rng(seed);
    KMeansModel model;
    model.c = c;
    model.d = static_cast<uint32_t>(d);
    model.centroids = kmeanspp_init(points, n, d, c, rng);

    std::vector<uint32_t> assign(n);
    std::vector<double> dist(n);
    std::vector<double> sums(size_t(c) * d);
    std::vector<uint64_t> counts(c);

    auto assign_and_objective = [&]() {
        kernels::nearest_centroid(points, n, model.centroids.data(), c, d,
                                  assign.data(), dist.data(), ex);
        double obj = 0.0;
        for (size_t i = 0; i < n; ++i) obj += dist[i];
        return obj;
    };

    double prev_obj = assign_and_objective();
    if (out_objectives) out_objectives->push_back(prev_obj);

    for (uint32_t it = 0; it < iters; ++it) {
        // update step: fp64 cluster sums, rounded back to fp32
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (size_t i = 0; i < n; ++i) {
            double* srow = sums.data() + size_t(assign[i]) * d;
            const float* p = points + i * d;
            for (size_t k = 0; k < d; ++k) srow[k] += p[k];
            ++counts[assign[i]];
        }
        for (uint32_t j = 0; j < c; ++j) {
            if (counts[j] == 0) continue;
            float* cj = model.centroids.data() + size_t(j) * d;
            const double* srow = sums.data() + size_t(j) * d;
            double inv = 1.0 / static_cast<double>(counts[j]);
            for (size_t k = 0; k < d; ++k)
                cj[k] = static_cast<float>(srow[k] * inv);
        }
        // re-seed empty clusters to the farthest points
        for (uint32_t j = 0; j < c; ++j) {
            if (counts[j] != 0) continue;
            size_t far = 0;
            double far_dist = -1.0;
            for (size_t i = 0; i < n; ++i) {
                if (dist[i] > far_dist) { far_dist = dist[i]; far = i; }
            }
            float* cj = model.centroids.data() + size_t(j) * d;
            std::copy(points + far * d, points + far * d + d, cj);
            dist[far] = -1.0;  // keep two empty clusters from claiming the same point
        }

        double obj = assign_and_objective();
        if (out_objectives) out_objectives->push_back(obj);
        // fp32 centroid rounding leaves at most ulp-level slack
        require(obj <= prev_obj * (1.0 + 1e-12) + 1e-12,
                "kmeans: objective increased");
        prev_obj = obj;
    }

    model.objective = prev_obj;
    if (out_assign) *out_assign = assign;
    return model;
}

PqCodebook pq_train(const float* residuals, size_t n, size_t d,
                    uint32_t m, uint32_t b, uint32_t iters, uint64_t seed,
                    Exec ex) {
    require(m >= 1 && d % m == 0, "pq_train: d must be divisible by m");
    require(b >= 1 && b <= 8, "pq_train: b must be in [1, 8]");
    uint32_t s = 1u << b;
    require(n >= s, "pq_train: fewer training vectors than sub-centroids");

    PqCodebook cb;
    cb.m = m;
    cb.b = b;
    cb.s = s;
    cb.d = static_cast<uint32_t>(d);
    cb.dsub = static_cast<uint32_t>(d / m);
    cb.centroids.resize(size_t(m) * s * cb.dsub);

    std::vector<float> slice(n * cb.dsub);
    for (uint32_t j = 0; j < m; ++j) {
        for (size_t i = 0; i < n; ++i) {
            const float* src = residuals + i * d + size_t(j) * cb.dsub;
            std::copy(src, src + cb.dsub, slice.data() + i * cb.dsub);
        }
        KMeansModel km = kmeans(slice.data(), n, cb.dsub, s, iters,
                                derive_seed(seed, j), nullptr, nullptr, ex);
        std::copy(km.centroids.begin(), km.centroids.end(),
                  cb.centroids.begin() + size_t(j) * s * cb.dsub);
    }
    return cb;
}

PqCode pq_encode(const PqCodebook& cb, const float* vec) {
    PqCode code(cb.m);
    kernels::pq_encode_batch_serial(vec, 1, cb.d, cb.centroids.data(), cb.m,
                                    cb.s, code.data());
    return code;
}

std::vector<float> pq_decode(const PqCodebook& cb, const uint8_t* code) {
    std::vector<float> out(cb.d);
    for (uint32_t j = 0; j < cb.m; ++j) {
        require(code[j] < cb.s, "pq_decode: sub-index out of range");
        const float* cent = cb.sub_centroid(j, code[j]);
        std::copy(cent, cent + cb.dsub, out.begin() + size_t(j) * cb.dsub);
    }
    return out;
}

std::vector<double> adc_tables(const PqCodebook& cb, const float* query) {
    std::vector<double> tables(size_t(cb.m) * cb.s);
    for (uint32_t j = 0; j < cb.m; ++j) {
        const float* slice = query + size_t(j) * cb.dsub;
        double* row = tables.data() + size_t(j) * cb.s;
        for (uint32_t i = 0; i < cb.s; ++i)
            row[i] = kernels::l2sq(slice, cb.sub_centroid(j, i), cb.dsub);
    }
    return tables;
}

std::vector<double> adc_tables_ip(const PqCodebook& cb, const float* query) {
    std::vector<double> tables(size_t(cb.m) * cb.s);
    for (uint32_t j = 0; j < cb.m; ++j) {
        const float* slice = query + size_t(j) * cb.dsub;
        double* row = tables.data() + size_t(j) * cb.s;
        for (uint32_t i = 0; i < cb.s; ++i)
            row[i] = kernels::dot_f32(slice, cb.sub_centroid(j, i), cb.dsub);
    }
    return tables;
}

} // namespace uclm
