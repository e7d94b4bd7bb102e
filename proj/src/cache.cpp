#include "uclm/cache.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "uclm/error.hpp"
#include "uclm/kernels.hpp"

namespace uclm {

double kernel_eval(KernelKind kind, double u) {
    switch (kind) {
    case KernelKind::epanechnikov: {
        double v = 1.0 - u * u;
        return v > 0.0 ? v : 0.0;
    }
    case KernelKind::gaussian:
        return std::exp(-0.5 * u * u);
    }
    raise("cache: unknown kernel kind");
}

double Distribution::prob_of(uint32_t w) const {
    if (dense()) {
        return w < probs.size() ? probs[w] : 0.0;
    }
    for (size_t i = 0; i < support.size(); ++i)
        if (support[i] == w) return probs[i];
    return 0.0;
}

double Distribution::sum() const {
    double s = 0.0;
    for (double p : probs) s += p;
    return s;
}

namespace {

// Accumulate kernel weights per word and normalize. Word ids are folded in
// ascending order so the result does not depend on neighbor ordering.
std::optional<Distribution> normalize_weights(std::vector<uint32_t> words,
                                              std::vector<double> weights,
                                              uint32_t domain_size) {
    std::vector<size_t> order(words.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return words[a] < words[b];
    });

    Distribution dist;
    dist.domain_size = domain_size;
    double total = 0.0;
    for (size_t i = 0; i < order.size();) {
        uint32_t w = words[order[i]];
        double acc = 0.0;
        for (; i < order.size() && words[order[i]] == w; ++i)
            acc += weights[order[i]];
        if (acc > 0.0) {
            dist.support.push_back(w);
            dist.probs.push_back(acc);
            total += acc;
        }
    }
    if (total <= 0.0 || !std::isfinite(total)) return std::nullopt;
    for (double& p : dist.probs) p /= total;
    return dist;
}

} // namespace

std::optional<Distribution> cache_prob(const std::vector<Neighbor>& neighbors,
                                       const CacheConfig& cfg,
                                       uint32_t domain_size) {
    if (neighbors.empty()) return std::nullopt;
    require(cfg.k_nn >= 1, "cache: k_nn must be >= 1");

    size_t used = std::min<size_t>(cfg.k_nn, neighbors.size());
    double theta_sq = neighbors[used - 1].approx_sq_dist;
    if (theta_sq < 0.0) theta_sq = 0.0;

    if (theta_sq == 0.0) {
        // All usable neighbors coincide with the query: report the empirical
        // distribution over the zero-distance entries.
        std::vector<uint32_t> words;
        std::vector<double> weights;
        for (size_t i = 0; i < used; ++i) {
            if (neighbors[i].approx_sq_dist <= 0.0) {
                words.push_back(neighbors[i].word_id);
                weights.push_back(1.0);
            }
        }
        return normalize_weights(std::move(words), std::move(weights),
                                 domain_size);
    }

    double theta = std::sqrt(theta_sq);
    std::vector<uint32_t> words(used);
    std::vector<double> weights(used);
    for (size_t i = 0; i < used; ++i) {
        double dist = std::sqrt(std::max(0.0, neighbors[i].approx_sq_dist));
        words[i] = neighbors[i].word_id;
        weights[i] = kernel_eval(cfg.kernel, dist / theta);
    }
    return normalize_weights(std::move(words), std::move(weights),
                             domain_size);
}

std::optional<Distribution> cache_prob_exact(const float* vecs,
                                             const uint32_t* words_in,
                                             size_t n, size_t d,
                                             const float* query,
                                             KernelKind kernel, double theta,
                                             uint32_t domain_size) {
    require(n > 0, "cache: exact estimate over an empty store");
    require(theta > 0.0, "cache: bandwidth must be positive");
    std::vector<uint32_t> words(words_in, words_in + n);
    std::vector<double> weights(n);
    for (size_t i = 0; i < n; ++i) {
        double dist = std::sqrt(kernels::l2sq(query, vecs + i * d, d));
        weights[i] = kernel_eval(kernel, dist / theta);
    }
    return normalize_weights(std::move(words), std::move(weights),
                             domain_size);
}

LocalCache::LocalCache(uint32_t capacity, double theta_flat, uint32_t d)
    : capacity_(capacity), theta_flat_(theta_flat), d_(d),
      states_(size_t(capacity) * d), words_(capacity) {
    require(capacity >= 1, "cache: local cache capacity must be >= 1");
    require(theta_flat >= 0.0, "cache: theta_flat must be >= 0");
    require(d >= 1, "cache: state dimension must be >= 1");
}

namespace {

void normalize_into(const float* h, float* out, uint32_t d) {
    double nrm = 0.0;
    for (uint32_t i = 0; i < d; ++i) nrm += double(h[i]) * double(h[i]);
    nrm = std::sqrt(nrm);
    if (nrm == 0.0) {
        std::memset(out, 0, size_t(d) * sizeof(float));
        return;
    }
    for (uint32_t i = 0; i < d; ++i) out[i] = float(double(h[i]) / nrm);
}

} // namespace

void LocalCache::insert(const float* h, uint32_t word) {
    normalize_into(h, states_.data() + head_ * d_, d_);
    words_[head_] = word;
    head_ = (head_ + 1) % capacity_;
    if (count_ < capacity_) ++count_;
}

std::optional<Distribution> LocalCache::prob(const float* h,
                                             uint32_t domain_size) const {
    if (count_ == 0) return std::nullopt;
    if (theta_flat_ == 0.0) {
        std::vector<uint32_t> words(words_.begin(), words_.begin() + count_);
        std::vector<double> weights(count_, 1.0);
        return normalize_weights(std::move(words), std::move(weights),
                                 domain_size);
    }
    std::vector<float> q(d_);
    normalize_into(h, q.data(), d_);
    // exp(theta * <q, hi>) over unit vectors equals a gaussian kernel in the
    // euclidean distance with bandwidth 1/sqrt(theta), up to a factor that
    // cancels in the normalization.
    double theta = 1.0 / std::sqrt(theta_flat_);
    return cache_prob_exact(states_.data(), words_.data(), count_, d_,
                            q.data(), KernelKind::gaussian, theta,
                            domain_size);
}

std::vector<uint32_t> LocalCache::window_words() const {
    std::vector<uint32_t> out;
    out.reserve(count_);
    size_t start = count_ < capacity_ ? 0 : head_;
    for (size_t i = 0; i < count_; ++i)
        out.push_back(words_[(start + i) % capacity_]);
    return out;
}

void UnigramCounts::observe(uint32_t w) {
    if (w >= counts.size()) counts.resize(size_t(w) + 1, 0);
    ++counts[w];
    ++total;
}

std::optional<Distribution> unigram_prob(const UnigramCounts& counts) {
    if (counts.total == 0) return std::nullopt;
    Distribution dist;
    dist.domain_size = uint32_t(counts.counts.size());
    for (uint32_t w = 0; w < counts.counts.size(); ++w) {
        if (counts.counts[w] > 0) {
            dist.support.push_back(w);
            dist.probs.push_back(double(counts.counts[w]) /
                                 double(counts.total));
        }
    }
    return dist;
}

double combine_prob_of(double pm, double pc, bool cache_present, double lambda,
                       double epsilon, uint32_t v_ext) {
    double lam = cache_present ? lambda : 0.0;
    double mixed = (1.0 - lam) * pm + lam * pc;
    return (1.0 - epsilon) * mixed + epsilon / double(v_ext);
}

Distribution combine(const Distribution& p_model, const Distribution* p_cache,
                     double lambda, double epsilon, uint32_t v_ext) {
    require(lambda >= 0.0 && lambda <= 1.0, "cache: lambda must be in [0,1]");
    require(epsilon >= 0.0 && epsilon < 1.0, "cache: epsilon must be in [0,1)");
    require(v_ext >= 1, "cache: extended vocabulary must be non-empty");

    std::vector<double> pm(v_ext, 0.0);
    if (p_model.dense()) {
        require(p_model.probs.size() <= v_ext,
                "cache: model distribution exceeds extended vocabulary");
        std::copy(p_model.probs.begin(), p_model.probs.end(), pm.begin());
    } else {
        for (size_t i = 0; i < p_model.support.size(); ++i) {
            require(p_model.support[i] < v_ext,
                    "cache: model support exceeds extended vocabulary");
            pm[p_model.support[i]] = p_model.probs[i];
        }
    }

    std::vector<double> pc(v_ext, 0.0);
    bool cache_present = p_cache != nullptr;
    if (cache_present) {
        if (p_cache->dense()) {
            require(p_cache->probs.size() <= v_ext,
                    "cache: cache distribution exceeds extended vocabulary");
            std::copy(p_cache->probs.begin(), p_cache->probs.end(), pc.begin());
        } else {
            for (size_t i = 0; i < p_cache->support.size(); ++i) {
                require(p_cache->support[i] < v_ext,
                        "cache: cache support exceeds extended vocabulary");
                pc[p_cache->support[i]] = p_cache->probs[i];
            }
        }
    }

    Distribution out;
    out.domain_size = v_ext;
    out.probs.resize(v_ext);
    for (uint32_t w = 0; w < v_ext; ++w)
        out.probs[w] = combine_prob_of(pm[w], pc[w], cache_present, lambda,
                                       epsilon, v_ext);
    return out;
}

} // namespace uclm
