#include "uclm/annindex.hpp"

#include <algorithm>
#include <fstream>

#include "uclm/error.hpp"
#include "uclm/io.hpp"
#include "uclm/kernels.hpp"
#include "uclm/rng.hpp"

namespace uclm {

namespace {

inline bool neighbor_less(const Neighbor& a, const Neighbor& b) {
    if (a.approx_sq_dist != b.approx_sq_dist)
        return a.approx_sq_dist < b.approx_sq_dist;
    return a.entry_id < b.entry_id;
}

void top_k_ascending(std::vector<Neighbor>& cands, size_t k) {
    if (cands.size() > k) {
        std::nth_element(cands.begin(), cands.begin() + k, cands.end(),
                         neighbor_less);
        cands.resize(k);
    }
    std::sort(cands.begin(), cands.end(), neighbor_less);
}

} // namespace

std::vector<Neighbor> exact_search(const float* vecs, const uint64_t* ids,
                                   const uint32_t* words, size_t n, size_t d,
                                   const float* query, size_t k, Exec ex) {
    std::vector<double> dist(n);
    kernels::pairwise_sqdist(query, vecs, n, d, dist.data(), ex);
    std::vector<Neighbor> out(n);
    for (size_t i = 0; i < n; ++i)
        out[i] = Neighbor{ids[i], words[i], dist[i]};
    top_k_ascending(out, k);
    return out;
}

IvfPqIndex IvfPqIndex::train(const float* samples, size_t n, size_t d,
                             const IvfPqConfig& cfg, uint64_t seed, Exec ex) {
    require(cfg.c >= 1, "index_train: need at least one coarse centroid");
    require(cfg.nprobe >= 1 && cfg.nprobe <= cfg.c,
            "index_train: nprobe must be in [1, c]");
    require(n >= cfg.c && n >= (size_t(1) << cfg.b),
            "index_train: insufficient training samples");

    IvfPqIndex idx;
    idx.cfg_ = cfg;
    idx.d_ = static_cast<uint32_t>(d);

    std::vector<uint32_t> assign;
    idx.coarse_ = kmeans(samples, n, d, cfg.c, cfg.kmeans_iters,
                         derive_seed(seed, 0), &assign, nullptr, ex);

    // PQ is trained on residuals to the assigned coarse centroid
    std::vector<float> residuals(n * d);
    for (size_t i = 0; i < n; ++i) {
        const float* x = samples + i * d;
        const float* cent = idx.coarse_.centroid(assign[i]);
        float* r = residuals.data() + i * d;
        for (size_t kk = 0; kk < d; ++kk) r[kk] = x[kk] - cent[kk];
    }
    idx.codebook_ = pq_train(residuals.data(), n, d, cfg.m, cfg.b,
                             cfg.kmeans_iters, derive_seed(seed, 1), ex);

    idx.lists_.resize(cfg.c);
    idx.trained_ = true;
    return idx;
}

uint32_t IvfPqIndex::nearest_coarse(const float* v) const {
    uint32_t best;
    double best_dist;
    kernels::nearest_centroid_serial(v, 1, coarse_.centroids.data(), cfg_.c,
                                     d_, &best, &best_dist);
    return best;
}

void IvfPqIndex::add(uint64_t entry_id, const float* h, uint32_t word_id) {
    require(trained_, "index_add: index is not trained");
    uint32_t l = nearest_coarse(h);
    const float* cent = coarse_.centroid(l);
    std::vector<float> residual(d_);
    for (uint32_t i = 0; i < d_; ++i) residual[i] = h[i] - cent[i];
    PqCode code = pq_encode(codebook_, residual.data());

    InvList& list = lists_[l];
    list.ids.push_back(entry_id);
    list.words.push_back(word_id);
    list.codes.insert(list.codes.end(), code.begin(), code.end());
    ++count_;
}

std::vector<Neighbor> IvfPqIndex::search(const float* query, uint32_t k_nn,
                                         uint32_t nprobe, Exec ex) const {
    require(trained_, "index_search: index is not trained");
    require(nprobe >= 1 && nprobe <= cfg_.c,
            "index_search: nprobe must be in [1, c]");
    if (count_ == 0) return {};

    // rank coarse centroids, ties to the lower id
    std::vector<double> cdist(cfg_.c);
    kernels::pairwise_sqdist(query, coarse_.centroids.data(), cfg_.c, d_,
                             cdist.data(), ex);
    std::vector<uint32_t> order(cfg_.c);
    for (uint32_t i = 0; i < cfg_.c; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
        if (cdist[a] != cdist[b]) return cdist[a] < cdist[b];
        return a < b;
    });

    std::vector<uint32_t> probes;
    for (uint32_t i = 0; i < nprobe; ++i) {
        if (!lists_[order[i]].ids.empty()) probes.push_back(order[i]);
    }

    // each probed list gets its own residual table and candidate buffer, so
    // the per-list work parallelizes without reordering anything
    std::vector<std::vector<Neighbor>> per_list(probes.size());
    const bool par = ex == Exec::parallel;
#pragma omp parallel for schedule(dynamic) if (par && probes.size() > 1)
    for (size_t pi = 0; pi < probes.size(); ++pi) {
        const InvList& list = lists_[probes[pi]];
        const float* cent = coarse_.centroid(probes[pi]);
        std::vector<float> qres(d_);
        for (uint32_t i = 0; i < d_; ++i) qres[i] = query[i] - cent[i];

        size_t len = list.ids.size();
        std::vector<double> dist(len);
        if (cfg_.metric == Metric::l2) {
            std::vector<double> tables = adc_tables(codebook_, qres.data());
            kernels::adc_scan_serial(tables.data(), cfg_.m, codebook_.s,
                                     list.codes.data(), len, dist.data());
        } else {
            // q.(cent + decode(code)) = q.cent + sum over subspaces of
            // <q slice, sub-centroid>; tables are built from the raw query
            std::vector<double> tables = adc_tables_ip(codebook_, query);
            kernels::adc_scan_serial(tables.data(), cfg_.m, codebook_.s,
                                     list.codes.data(), len, dist.data());
            double qc = kernels::dot_f32(query, cent, d_);
            for (size_t i = 0; i < len; ++i) dist[i] = -(qc + dist[i]);
        }
        std::vector<Neighbor>& cands = per_list[pi];
        cands.resize(len);
        for (size_t i = 0; i < len; ++i)
            cands[i] = Neighbor{list.ids[i], list.words[i], dist[i]};
        top_k_ascending(cands, k_nn);
    }

    std::vector<Neighbor> merged;
    for (auto& cands : per_list)
        merged.insert(merged.end(), cands.begin(), cands.end());
    top_k_ascending(merged, k_nn);
    return merged;
}

std::vector<float> IvfPqIndex::reconstruct(uint32_t list, size_t pos) const {
    const InvList& l = lists_[list];
    std::vector<float> dec =
        pq_decode(codebook_, l.codes.data() + pos * cfg_.m);
    const float* cent = coarse_.centroid(list);
    for (uint32_t i = 0; i < d_; ++i) dec[i] += cent[i];
    return dec;
}

// ---------------------------------------------------------------------------
// persistence: header {magic "UCIX", version, d, c, m, b, count}, coarse
// centroids, PQ codebooks, then per list (length, entries).

static const char kIndexMagic[4] = {'U', 'C', 'I', 'X'};
static const uint32_t kIndexVersion = 1;

void IvfPqIndex::save(std::ostream& os) const {
    require(trained_, "index_save: index is not trained");
    io::write_magic(os, kIndexMagic);
    io::write_pod<uint32_t>(os, kIndexVersion);
    io::write_pod<uint32_t>(os, d_);
    io::write_pod<uint32_t>(os, cfg_.c);
    io::write_pod<uint32_t>(os, cfg_.m);
    io::write_pod<uint32_t>(os, cfg_.b);
    io::write_pod<uint64_t>(os, count_);
    io::write_pod<uint32_t>(os, cfg_.nprobe);
    io::write_pod<uint32_t>(os, cfg_.k_nn);
    io::write_pod<uint8_t>(os, static_cast<uint8_t>(cfg_.metric));
    io::write_array(os, coarse_.centroids.data(), coarse_.centroids.size());
    io::write_array(os, codebook_.centroids.data(), codebook_.centroids.size());
    for (const InvList& list : lists_) {
        io::write_pod<uint64_t>(os, list.ids.size());
        for (size_t i = 0; i < list.ids.size(); ++i) {
            io::write_pod<uint64_t>(os, list.ids[i]);
            io::write_pod<uint32_t>(os, list.words[i]);
            io::write_array(os, list.codes.data() + i * cfg_.m, cfg_.m);
        }
    }
}

void IvfPqIndex::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    require(os.good(), "index_save: cannot open " + path);
    save(os);
    require(os.good(), "index_save: write failed for " + path);
}

IvfPqIndex IvfPqIndex::load(std::istream& is) {
    io::check_magic(is, kIndexMagic, "UCIX index");
    uint32_t version = io::read_pod<uint32_t>(is, "version");
    require(version == kIndexVersion, "index_load: unsupported version");

    IvfPqIndex idx;
    idx.d_ = io::read_pod<uint32_t>(is, "d");
    idx.cfg_.c = io::read_pod<uint32_t>(is, "c");
    idx.cfg_.m = io::read_pod<uint32_t>(is, "m");
    idx.cfg_.b = io::read_pod<uint32_t>(is, "b");
    uint64_t count = io::read_pod<uint64_t>(is, "count");
    idx.cfg_.nprobe = io::read_pod<uint32_t>(is, "nprobe");
    idx.cfg_.k_nn = io::read_pod<uint32_t>(is, "k_nn");
    idx.cfg_.metric = static_cast<Metric>(io::read_pod<uint8_t>(is, "metric"));
    require(idx.cfg_.m >= 1 && idx.cfg_.b >= 1 && idx.cfg_.b <= 8 &&
                idx.d_ % idx.cfg_.m == 0 && idx.cfg_.c >= 1,
            "index_load: inconsistent header");

    idx.coarse_.c = idx.cfg_.c;
    idx.coarse_.d = idx.d_;
    idx.coarse_.centroids.resize(size_t(idx.cfg_.c) * idx.d_);
    io::read_array(is, idx.coarse_.centroids.data(),
                   idx.coarse_.centroids.size(), "coarse centroids");

    idx.codebook_.m = idx.cfg_.m;
    idx.codebook_.b = idx.cfg_.b;
    idx.codebook_.s = 1u << idx.cfg_.b;
    idx.codebook_.d = idx.d_;
    idx.codebook_.dsub = idx.d_ / idx.cfg_.m;
    idx.codebook_.centroids.resize(size_t(idx.cfg_.m) * idx.codebook_.s *
                                   idx.codebook_.dsub);
    io::read_array(is, idx.codebook_.centroids.data(),
                   idx.codebook_.centroids.size(), "pq codebooks");

    idx.lists_.resize(idx.cfg_.c);
    uint64_t total = 0;
    for (InvList& list : idx.lists_) {
        uint64_t len = io::read_pod<uint64_t>(is, "list length");
        list.ids.resize(len);
        list.words.resize(len);
        list.codes.resize(len * idx.cfg_.m);
        for (uint64_t i = 0; i < len; ++i) {
            list.ids[i] = io::read_pod<uint64_t>(is, "entry id");
            list.words[i] = io::read_pod<uint32_t>(is, "word id");
            io::read_array(is, list.codes.data() + i * idx.cfg_.m, idx.cfg_.m,
                           "pq code");
        }
        total += len;
    }
    require(total == count, "index_load: count does not match list contents");
    idx.count_ = count;
    idx.trained_ = true;
    return idx;
}

IvfPqIndex IvfPqIndex::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(is.good(), "index_load: cannot open " + path);
    return load(is);
}

} // namespace uclm
