#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "uclm/annindex.hpp"

namespace uclm {

enum class KernelKind : uint8_t { epanechnikov = 0, gaussian = 1 };

// gaussian: exp(-u^2/2); epanechnikov: max(0, 1-u^2), unnormalized (the
// normalizing constant cancels when the estimate is renormalized).
double kernel_eval(KernelKind kind, double u);

struct CacheConfig {
    uint32_t k_nn = 128;
    KernelKind kernel = KernelKind::epanechnikov;
    double lambda = 0.2;           // cache interpolation weight, in [0,1]
    double epsilon_uniform = 0.01; // uniform mixing weight, in [0,1)
};

// Probability assignment over word ids. Sparse form lists its support
// explicitly (implicit zeros elsewhere); dense form covers [0, domain_size).
struct Distribution {
    std::vector<uint32_t> support;  // empty <=> dense
    std::vector<double> probs;
    uint32_t domain_size = 0;

    bool dense() const { return support.empty(); }
    double prob_of(uint32_t w) const;
    double sum() const;
};

// Variable-kernel estimate from a sorted neighbor list: bandwidth is the
// distance to the k-th nearest neighbor (or the last one when fewer exist).
// Zero bandwidth falls back to the empirical distribution of the
// zero-distance neighbors. Returns nullopt when the list is empty or every
// kernel weight vanishes; the caller then drops the cache term for the step.
std::optional<Distribution> cache_prob(const std::vector<Neighbor>& neighbors,
                                       const CacheConfig& cfg,
                                       uint32_t domain_size);

// Full-sum estimate over every stored pair with a fixed bandwidth theta.
// Exact reference for the approximate path; also backs the local cache.
std::optional<Distribution> cache_prob_exact(const float* vecs,
                                             const uint32_t* words, size_t n,
                                             size_t d, const float* query,
                                             KernelKind kernel, double theta,
                                             uint32_t domain_size);

// Fixed-capacity FIFO window scored with the continuous-cache weighting:
// stored and query states are L2-normalized and each entry gets weight
// exp(theta_flat * <query, entry>).
class LocalCache {
public:
    LocalCache(uint32_t capacity, double theta_flat, uint32_t d);

    void insert(const float* h, uint32_t word);
    std::optional<Distribution> prob(const float* h, uint32_t domain_size) const;

    size_t size() const { return count_; }
    uint32_t capacity() const { return capacity_; }
    // oldest-first snapshot of the window contents, for tests
    std::vector<uint32_t> window_words() const;

private:
    uint32_t capacity_;
    double theta_flat_;
    uint32_t d_;
    std::vector<float> states_;   // normalized, ring buffer of capacity rows
    std::vector<uint32_t> words_;
    size_t head_ = 0;             // next slot to overwrite
    size_t count_ = 0;
};

// Word occurrence counts over the evaluation stream so far.
struct UnigramCounts {
    std::vector<uint64_t> counts;
    uint64_t total = 0;

    void observe(uint32_t w);
};

std::optional<Distribution> unigram_prob(const UnigramCounts& counts);

// p = (1-eps) * ((1-lambda) * p_model + lambda * p_cache) + eps / v_ext,
// with both inputs embedded into the extended vocabulary. A missing cache
// distribution is treated as lambda = 0 for the step. The result is dense,
// normalized, and strictly positive whenever eps > 0.
Distribution combine(const Distribution& p_model, const Distribution* p_cache,
                     double lambda, double epsilon, uint32_t v_ext);

// single-word path, bit-identical to combine(...).probs[w]
double combine_prob_of(double pm, double pc, bool cache_present, double lambda,
                       double epsilon, uint32_t v_ext);

} // namespace uclm
