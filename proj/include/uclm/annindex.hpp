#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "uclm/exec.hpp"
#include "uclm/quant.hpp"

namespace uclm {

enum class Metric : uint8_t { l2 = 0, inner_product = 1 };

struct IvfPqConfig {
    uint32_t c = 64;            // coarse centroids
    uint32_t nprobe = 8;        // probed lists per query
    uint32_t m = 8;             // PQ sub-quantizers
    uint32_t b = 8;             // bits per sub-index
    uint32_t kmeans_iters = 20;
    uint32_t k_nn = 128;        // neighbors per query
    Metric metric = Metric::l2; // l2 is normative; inner_product optional
};

struct Neighbor {
    uint64_t entry_id = 0;
    uint32_t word_id = 0;
    // For the l2 metric this is the ADC estimate of the squared Euclidean
    // distance; for inner_product it is the negated estimated inner product
    // (so ascending sort keeps "best first" in both metrics).
    double approx_sq_dist = 0.0;
};

// Exhaustive exact squared-L2 scan over raw vectors; total order with ties
// broken by entry id. Test oracle and the exact cache backend.
std::vector<Neighbor> exact_search(const float* vecs, const uint64_t* ids,
                                   const uint32_t* words, size_t n, size_t d,
                                   const float* query, size_t k,
                                   Exec ex = default_exec());

// Inverted-file product-quantization index over hidden states. Entries carry
// a word payload and are stored as PQ codes of the residual to their nearest
// coarse centroid. Append-only: the cache never evicts.
class IvfPqIndex {
public:
    IvfPqIndex() = default;

    // Fits the coarse quantizer and the residual PQ codebooks on `samples`
    // and returns an empty (trained) index.
    static IvfPqIndex train(const float* samples, size_t n, size_t d,
                            const IvfPqConfig& cfg, uint64_t seed,
                            Exec ex = default_exec());

    void add(uint64_t entry_id, const float* h, uint32_t word_id);

    // Scans the nprobe nearest inverted lists; per candidate the distance is
    // the ADC table sum for the per-list query residual. Returns up to k_nn
    // neighbors sorted ascending, ties by entry id. Empty index gives an
    // empty result.
    std::vector<Neighbor> search(const float* query, uint32_t k_nn,
                                 uint32_t nprobe, Exec ex = default_exec()) const;

    void save(std::ostream& os) const;
    void save(const std::string& path) const;
    static IvfPqIndex load(std::istream& is);
    static IvfPqIndex load(const std::string& path);

    bool trained() const { return trained_; }
    uint64_t count() const { return count_; }
    uint32_t dim() const { return d_; }
    const IvfPqConfig& config() const { return cfg_; }
    const KMeansModel& coarse() const { return coarse_; }
    const PqCodebook& codebook() const { return codebook_; }
    size_t list_size(uint32_t l) const { return lists_[l].ids.size(); }

    // decoded (quantized) reconstruction of one stored entry, for tests
    std::vector<float> reconstruct(uint32_t list, size_t pos) const;

private:
    struct InvList {
        std::vector<uint64_t> ids;
        std::vector<uint32_t> words;
        std::vector<uint8_t> codes;  // ids.size() * m
    };

    uint32_t nearest_coarse(const float* v) const;

    IvfPqConfig cfg_;
    uint32_t d_ = 0;
    bool trained_ = false;
    KMeansModel coarse_;
    PqCodebook codebook_;
    std::vector<InvList> lists_;
    uint64_t count_ = 0;
};

} // namespace uclm
