#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "uclm/annindex.hpp"
#include "uclm/cache.hpp"
#include "uclm/corpus.hpp"
#include "uclm/rnnlm.hpp"

namespace uclm {

// static:          model + uniform smoothing
// unigram:         model + online unigram counts (the sweep baseline)
// local_cache:     model + FIFO-window continuous cache
// unbounded_cache: model + full-history kernel cache over retrieved neighbors
enum class Method : uint8_t {
    static_lm = 0,
    unigram = 1,
    local_cache = 2,
    unbounded_cache = 3,
};

enum class CacheBackendKind : uint8_t { ivfpq = 0, exact = 1 };

// online: the extended vocabulary grows with the stream (V_ext at step t
// covers the train words plus test words up to and including x_t);
// upfront: V_ext is fixed to the full train+test vocabulary from the start.
enum class VocabMode : uint8_t { online = 0, upfront = 1 };

const char* method_name(Method m);
std::optional<Method> method_from_name(std::string_view name);

struct EvalConfig {
    Method method = Method::unbounded_cache;
    CacheBackendKind backend = CacheBackendKind::ivfpq;
    VocabMode vocab_mode = VocabMode::online;
    CacheConfig cache;             // k_nn, kernel, lambda, epsilon_uniform
    uint32_t nprobe = 8;           // ivfpq probes per query
    uint32_t local_capacity = 10000;
    double theta_flat = 0.3;       // local-cache flatness parameter
    bool reset_per_line = false;   // reset the recurrent state at line starts
    bool tune_lambda = false;      // grid-search lambda on the leading slice
    double tune_frac = 0.1;
    uint32_t chunk_size = 10000;   // per-chunk aggregation; 0 disables
};

struct EvalReport {
    uint64_t tokens = 0;
    double nll = 0.0;              // mean, nats/token
    double perplexity = 0.0;       // exp(nll)
    uint64_t oov_tokens = 0;
    double oov_rate = 0.0;
    // steps where a non-empty cache produced no usable estimate (every
    // kernel weight zero); the step falls back to lambda = 0
    uint64_t degenerate_steps = 0;
    double lambda_used = 0.0;
    std::vector<double> chunk_nll; // mean nll per chunk_size block
    std::vector<double> step_nll;  // -log p(x_t), per token
    std::vector<uint8_t> step_oov;
    std::vector<uint32_t> step_vext;
    // measured around the scoring loop only; never serialized
    double wall_seconds = 0.0;
    double tokens_per_sec = 0.0;
};

// Hidden states visited while consuming the stream (the state *before* each
// token), at most max_n rows of m.d floats.
std::vector<float> collect_states(const RnnModel& m, const TokenStream& tokens,
                                  size_t max_n);

// Fit the index quantizers on states gathered from a training stream; the
// returned index is trained and empty.
IvfPqIndex build_index(const RnnModel& m, const TokenStream& train_tokens,
                       const IvfPqConfig& cfg, uint64_t seed,
                       size_t max_states = 20000);

// Streaming evaluation. Per token: predict from the current state, score the
// combined distribution, insert the (state, token) pair into the configured
// cache, then advance the recurrence. `index` must be a trained index when
// method = unbounded_cache with the ivfpq backend (entries are added during
// the run); pass nullptr otherwise. line_starts (token offsets of line
// beginnings) enables reset_per_line.
EvalReport run_eval(const RnnModel& m,
                    const std::vector<std::string>& test_tokens,
                    const EvalConfig& cfg, IvfPqIndex* index,
                    const std::vector<size_t>* line_starts = nullptr);

// TSV serialization: '#'-prefixed key=value header (config echo and totals;
// timing is excluded so identical runs serialize byte-identically), then
// rows {t, nll, oov_flag, method}.
std::string report_to_tsv(
    const EvalReport& r, Method method,
    const std::vector<std::pair<std::string, std::string>>& extra_meta = {});
void write_report(const std::string& path, const std::string& tsv);

struct ReportRows {
    std::vector<std::pair<std::string, std::string>> meta;
    std::vector<double> nll;
    std::vector<uint8_t> oov;
    std::string method;
};
ReportRows read_report(const std::string& path);

struct KnnSweepPoint {
    uint32_t k = 0;
    double nll = 0.0;
    double perplexity = 0.0;
    double gap_nats = 0.0; // baseline mean nll - point mean nll
};
struct KnnSweepResult {
    double baseline_nll = 0.0; // static+unigram, same lambda/epsilon
    std::vector<KnnSweepPoint> points;
};

// Mean entropy gap vs the static+unigram baseline as a function of the
// neighbor count. Single pass: queries fetch the largest k once and the
// smaller settings reuse prefixes of the neighbor list. Duplicate k values
// are deduplicated.
KnnSweepResult sweep_knn(const RnnModel& m,
                         const std::vector<std::string>& test_tokens,
                         const EvalConfig& cfg, std::vector<uint32_t> k_values,
                         IvfPqIndex* index);

struct GrowthPoint {
    uint64_t t_begin = 0;
    uint64_t t_end = 0; // segment covers stream positions [t_begin, t_end)
    double method_nll = 0.0;
    double baseline_nll = 0.0;
    double gap_nats = 0.0;
};

// Entropy gap vs static+unigram over successive stream segments as the
// cache fills. Checkpoints must be strictly increasing and within the
// stream; a leading checkpoint 0 yields a gap of 0 by definition.
std::vector<GrowthPoint> sweep_cache_growth(
    const RnnModel& m, const std::vector<std::string>& test_tokens,
    const EvalConfig& cfg, std::vector<uint64_t> checkpoints,
    IvfPqIndex* index);

struct BenchRow {
    Method method = Method::static_lm;
    double wall_seconds = 0.0;
    double tokens_per_sec = 0.0;
    double perplexity = 0.0;
};

// Times {static, local_cache, unbounded_cache} on the same stream. The
// index is copied for the unbounded run, so the caller's stays untouched.
std::vector<BenchRow> bench_timing(const RnnModel& m,
                                   const std::vector<std::string>& test_tokens,
                                   const EvalConfig& cfg,
                                   const IvfPqIndex* index);

} // namespace uclm
