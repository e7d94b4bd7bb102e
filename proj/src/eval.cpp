#include "uclm/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>

#include "uclm/error.hpp"

namespace uclm {

const char* method_name(Method m) {
    switch (m) {
    case Method::static_lm: return "static";
    case Method::unigram: return "unigram";
    case Method::local_cache: return "local_cache";
    case Method::unbounded_cache: return "unbounded_cache";
    }
    return "?";
}

std::optional<Method> method_from_name(std::string_view name) {
    if (name == "static") return Method::static_lm;
    if (name == "unigram") return Method::unigram;
    if (name == "local_cache") return Method::local_cache;
    if (name == "unbounded_cache") return Method::unbounded_cache;
    return std::nullopt;
}

namespace {

struct ScoreResult {
    double pc = 0.0;
    bool present = false;
    bool degenerate = false; // candidates existed but no estimate came out
};

// Per-method cache state behind a single score/insert interface.
class CacheScorer {
public:
    CacheScorer(const RnnModel& m, const EvalConfig& cfg, IvfPqIndex* index)
        : cfg_(cfg), index_(index), d_(m.d) {
        if (cfg.method == Method::local_cache)
            local_.emplace(cfg.local_capacity, cfg.theta_flat, m.d);
        if (cfg.method == Method::unbounded_cache &&
            cfg.backend == CacheBackendKind::ivfpq) {
            require(index_ && index_->trained(),
                    "eval: the ivfpq backend needs a trained index");
            require(index_->dim() == m.d,
                    "eval: index dimension does not match the model");
            require(cfg.nprobe >= 1 && cfg.nprobe <= index_->config().c,
                    "eval: nprobe out of range for the index");
            next_id_ = index_->count();
        }
    }

    // valid only for the unbounded method
    std::vector<Neighbor> query(const float* h, uint32_t k) const {
        if (cfg_.backend == CacheBackendKind::ivfpq)
            return index_->search(h, k, cfg_.nprobe);
        return exact_search(vecs_.data(), ids_.data(), words_.data(),
                            words_.size(), d_, h, k);
    }

    ScoreResult score(const float* h, uint32_t target, uint32_t v_ext) {
        ScoreResult r;
        switch (cfg_.method) {
        case Method::static_lm:
            return r;
        case Method::unigram:
            if (uni_.total > 0) {
                r.present = true;
                r.pc = target < uni_.counts.size()
                           ? double(uni_.counts[target]) / double(uni_.total)
                           : 0.0;
            }
            return r;
        case Method::local_cache: {
            if (local_->size() == 0) return r;
            std::optional<Distribution> dist = local_->prob(h, v_ext);
            if (dist) {
                r.present = true;
                r.pc = dist->prob_of(target);
            } else {
                r.degenerate = true;
            }
            return r;
        }
        case Method::unbounded_cache: {
            std::vector<Neighbor> nb = query(h, cfg_.cache.k_nn);
            if (nb.empty()) return r;
            std::optional<Distribution> dist =
                cache_prob(nb, cfg_.cache, v_ext);
            if (dist) {
                r.present = true;
                r.pc = dist->prob_of(target);
            } else {
                r.degenerate = true;
            }
            return r;
        }
        }
        return r;
    }

    void insert(const float* h, uint32_t token) {
        switch (cfg_.method) {
        case Method::static_lm:
            return;
        case Method::unigram:
            uni_.observe(token);
            return;
        case Method::local_cache:
            local_->insert(h, token);
            return;
        case Method::unbounded_cache:
            if (cfg_.backend == CacheBackendKind::ivfpq) {
                index_->add(next_id_++, h, token);
            } else {
                vecs_.insert(vecs_.end(), h, h + d_);
                ids_.push_back(next_id_++);
                words_.push_back(token);
            }
            return;
        }
    }

private:
    const EvalConfig& cfg_;
    IvfPqIndex* index_;
    uint32_t d_;
    uint64_t next_id_ = 0;
    std::optional<LocalCache> local_;
    UnigramCounts uni_;
    std::vector<float> vecs_; // exact backend storage
    std::vector<uint64_t> ids_;
    std::vector<uint32_t> words_;
};

// advances through line_starts; true when t begins a new line (t > 0)
struct LineResetCursor {
    const std::vector<size_t>* starts;
    size_t next = 0;

    bool should_reset(uint64_t t) {
        if (!starts) return false;
        while (next < starts->size() && (*starts)[next] < t) ++next;
        if (next < starts->size() && (*starts)[next] == t) {
            ++next;
            return t > 0;
        }
        return false;
    }
};

void validate_mixing(const EvalConfig& cfg) {
    require(cfg.cache.lambda >= 0.0 && cfg.cache.lambda <= 1.0,
            "eval: lambda must be in [0,1]");
    require(cfg.cache.epsilon_uniform >= 0.0 && cfg.cache.epsilon_uniform < 1.0,
            "eval: epsilon must be in [0,1)");
    require(cfg.cache.k_nn >= 1, "eval: k_nn must be >= 1");
    require(cfg.tune_frac > 0.0 && cfg.tune_frac <= 1.0,
            "eval: tune_frac must be in (0,1]");
}

// One pass over the leading slice collecting (p_model, p_cache) pairs, then
// the lambda grid {0.05 .. 0.5} evaluated arithmetically (combine is
// pointwise, so no second pass is needed). Backend state is scratch.
double tune_lambda_on_slice(const RnnModel& m, const TokenStream& ids,
                            const EvalConfig& cfg, IvfPqIndex* index,
                            const std::vector<size_t>* line_starts,
                            uint32_t v_ext_final) {
    uint64_t slice = std::max<uint64_t>(
        1, uint64_t(std::llround(cfg.tune_frac * double(ids.size()))));
    slice = std::min<uint64_t>(slice, ids.size());

    std::optional<IvfPqIndex> scratch;
    IvfPqIndex* idx = nullptr;
    if (cfg.method == Method::unbounded_cache &&
        cfg.backend == CacheBackendKind::ivfpq) {
        require(index, "eval: the ivfpq backend needs a trained index");
        scratch = *index; // the real run must start from the caller's state
        idx = &*scratch;
    }
    EvalConfig c2 = cfg;
    c2.tune_lambda = false;
    CacheScorer scorer(m, c2, idx);
    StreamEvaluator ev(m);
    LineResetCursor lines{line_starts};

    struct Sample {
        double pm, pc;
        bool present;
        uint32_t vext;
    };
    std::vector<Sample> samples;
    samples.reserve(slice);
    uint32_t v_run = m.v;
    for (uint64_t t = 0; t < slice; ++t) {
        if (cfg.reset_per_line && lines.should_reset(t)) ev.reset();
        uint32_t id = ids[t];
        v_run = cfg.vocab_mode == VocabMode::online
                    ? std::max(v_run, id + 1)
                    : v_ext_final;
        StepOutcome so = ev.next(id);
        ScoreResult sc = scorer.score(so.h_query.data(), id, v_run);
        samples.push_back({so.p_model, sc.pc, sc.present, v_run});
        scorer.insert(so.h_query.data(), id);
    }

    double best_lambda = 0.05;
    double best_nll = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= 10; ++i) {
        double lam = 0.05 * i;
        double nll = 0.0;
        for (const Sample& s : samples)
            nll -= std::log(combine_prob_of(s.pm, s.pc, s.present, lam,
                                            cfg.cache.epsilon_uniform,
                                            s.vext));
        if (nll < best_nll) {
            best_nll = nll;
            best_lambda = lam;
        }
    }
    return best_lambda;
}

} // namespace

std::vector<float> collect_states(const RnnModel& m, const TokenStream& tokens,
                                  size_t max_n) {
    size_t n = std::min(tokens.size(), max_n);
    std::vector<float> out(n * size_t(m.d));
    RnnState st = make_state(m);
    for (size_t i = 0; i < n; ++i) {
        for (uint32_t j = 0; j < m.d; ++j)
            out[i * m.d + j] = static_cast<float>(st.h[j]);
        step(m, st, tokens[i]);
    }
    return out;
}

IvfPqIndex build_index(const RnnModel& m, const TokenStream& train_tokens,
                       const IvfPqConfig& cfg, uint64_t seed,
                       size_t max_states) {
    require(!train_tokens.empty(), "eval: empty stream for index training");
    std::vector<float> states = collect_states(m, train_tokens, max_states);
    return IvfPqIndex::train(states.data(), states.size() / m.d, m.d, cfg,
                             seed);
}

EvalReport run_eval(const RnnModel& m,
                    const std::vector<std::string>& test_tokens,
                    const EvalConfig& cfg, IvfPqIndex* index,
                    const std::vector<size_t>* line_starts) {
    require(!test_tokens.empty(), "eval: empty test stream");
    validate_mixing(cfg);

    Vocabulary vocab = m.vocab;
    TokenStream ids = resolve_stream(test_tokens, vocab, true);
    const uint32_t v_ext_final = vocab.size();
    const uint64_t T = ids.size();
    const double eps = cfg.cache.epsilon_uniform;

    EvalReport rep;
    double lambda = cfg.cache.lambda;
    if (cfg.tune_lambda && cfg.method != Method::static_lm)
        lambda = tune_lambda_on_slice(m, ids, cfg, index, line_starts,
                                      v_ext_final);
    rep.lambda_used = lambda;

    CacheScorer scorer(m, cfg, index);
    StreamEvaluator ev(m);
    LineResetCursor lines{line_starts};
    rep.step_nll.resize(T);
    rep.step_oov.resize(T);
    rep.step_vext.resize(T);

    uint32_t v_run = m.v;
    double nll_sum = 0.0;
    auto t0 = std::chrono::steady_clock::now();
    for (uint64_t t = 0; t < T; ++t) {
        if (cfg.reset_per_line && lines.should_reset(t)) ev.reset();
        uint32_t id = ids[t];
        v_run = cfg.vocab_mode == VocabMode::online ? std::max(v_run, id + 1)
                                                    : v_ext_final;
        StepOutcome so = ev.next(id);
        ScoreResult sc = scorer.score(so.h_query.data(), id, v_run);
        if (sc.degenerate) ++rep.degenerate_steps;
        double p = combine_prob_of(so.p_model, sc.pc, sc.present, lambda, eps,
                                   v_run);
        double nll_t = -std::log(p);
        rep.step_nll[t] = nll_t;
        nll_sum += nll_t;
        bool oov = id >= m.v;
        rep.step_oov[t] = oov ? 1 : 0;
        rep.oov_tokens += oov ? 1 : 0;
        rep.step_vext[t] = v_run;
        scorer.insert(so.h_query.data(), id);
    }
    auto t1 = std::chrono::steady_clock::now();

    rep.tokens = T;
    rep.nll = nll_sum / double(T);
    rep.perplexity = std::exp(rep.nll);
    rep.oov_rate = double(rep.oov_tokens) / double(T);
    rep.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    rep.tokens_per_sec =
        rep.wall_seconds > 0.0 ? double(T) / rep.wall_seconds : 0.0;
    if (cfg.chunk_size > 0) {
        for (uint64_t start = 0; start < T; start += cfg.chunk_size) {
            uint64_t end = std::min<uint64_t>(T, start + cfg.chunk_size);
            double s = 0.0;
            for (uint64_t t = start; t < end; ++t) s += rep.step_nll[t];
            rep.chunk_nll.push_back(s / double(end - start));
        }
    }
    return rep;
}

namespace {

std::string g17(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

} // namespace

std::string report_to_tsv(
    const EvalReport& r, Method method,
    const std::vector<std::pair<std::string, std::string>>& extra_meta) {
    const char* mname = method_name(method);
    std::string out;
    out.reserve(r.step_nll.size() * 48 + 1024);
    out += "# method=";
    out += mname;
    out += '\n';
    out += "# tokens=" + std::to_string(r.tokens) + '\n';
    out += "# nll=" + g17(r.nll) + '\n';
    out += "# perplexity=" + g17(r.perplexity) + '\n';
    out += "# oov_tokens=" + std::to_string(r.oov_tokens) + '\n';
    out += "# oov_rate=" + g17(r.oov_rate) + '\n';
    out += "# degenerate_steps=" + std::to_string(r.degenerate_steps) + '\n';
    out += "# lambda_used=" + g17(r.lambda_used) + '\n';
    for (const auto& [k, v] : extra_meta) out += "# " + k + "=" + v + '\n';
    out += "# columns=t,nll,oov_flag,method\n";
    for (size_t t = 0; t < r.step_nll.size(); ++t) {
        out += std::to_string(t);
        out += '\t';
        out += g17(r.step_nll[t]);
        out += '\t';
        out += r.step_oov[t] ? '1' : '0';
        out += '\t';
        out += mname;
        out += '\n';
    }
    return out;
}

void write_report(const std::string& path, const std::string& tsv) {
    std::ofstream os(path, std::ios::binary);
    if (!os) raise("eval: cannot open " + path + " for writing");
    os.write(tsv.data(), std::streamsize(tsv.size()));
    if (!os) raise("eval: write failed for " + path);
}

ReportRows read_report(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) raise("eval: cannot open " + path);
    ReportRows rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            size_t start = line.find_first_not_of("# ");
            size_t eq = line.find('=', start);
            if (start == std::string::npos || eq == std::string::npos)
                raise("eval: malformed report header line: " + line);
            rows.meta.emplace_back(line.substr(start, eq - start),
                                   line.substr(eq + 1));
            continue;
        }
        size_t p1 = line.find('\t');
        size_t p2 = line.find('\t', p1 + 1);
        size_t p3 = line.find('\t', p2 + 1);
        if (p1 == std::string::npos || p2 == std::string::npos ||
            p3 == std::string::npos)
            raise("eval: malformed report row: " + line);
        rows.nll.push_back(std::stod(line.substr(p1 + 1, p2 - p1 - 1)));
        rows.oov.push_back(line.substr(p2 + 1, p3 - p2 - 1) == "1" ? 1 : 0);
        rows.method = line.substr(p3 + 1);
    }
    return rows;
}

KnnSweepResult sweep_knn(const RnnModel& m,
                         const std::vector<std::string>& test_tokens,
                         const EvalConfig& cfg, std::vector<uint32_t> k_values,
                         IvfPqIndex* index) {
    require(!test_tokens.empty(), "eval: empty test stream");
    require(!k_values.empty(), "eval: sweep needs at least one k value");
    std::sort(k_values.begin(), k_values.end());
    k_values.erase(std::unique(k_values.begin(), k_values.end()),
                   k_values.end());
    require(k_values.front() >= 1, "eval: k values must be >= 1");
    validate_mixing(cfg);

    Vocabulary vocab = m.vocab;
    TokenStream ids = resolve_stream(test_tokens, vocab, true);
    const uint64_t T = ids.size();
    const uint32_t kmax = k_values.back();
    const double lambda = cfg.cache.lambda;
    const double eps = cfg.cache.epsilon_uniform;

    EvalConfig c2 = cfg;
    c2.method = Method::unbounded_cache;
    c2.cache.k_nn = kmax;
    CacheScorer scorer(m, c2, index);
    UnigramCounts uni;
    StreamEvaluator ev(m);

    std::vector<double> nll_k(k_values.size(), 0.0);
    double nll_base = 0.0;
    uint32_t v_run = m.v;
    for (uint64_t t = 0; t < T; ++t) {
        uint32_t id = ids[t];
        v_run = cfg.vocab_mode == VocabMode::online ? std::max(v_run, id + 1)
                                                    : vocab.size();
        StepOutcome so = ev.next(id);
        std::vector<Neighbor> nb = scorer.query(so.h_query.data(), kmax);
        for (size_t i = 0; i < k_values.size(); ++i) {
            CacheConfig ck = cfg.cache;
            ck.k_nn = k_values[i];
            double pc = 0.0;
            bool present = false;
            if (!nb.empty()) {
                std::optional<Distribution> dist = cache_prob(nb, ck, v_run);
                if (dist) {
                    present = true;
                    pc = dist->prob_of(id);
                }
            }
            nll_k[i] -= std::log(
                combine_prob_of(so.p_model, pc, present, lambda, eps, v_run));
        }
        double pu = uni.total > 0 && id < uni.counts.size()
                        ? double(uni.counts[id]) / double(uni.total)
                        : 0.0;
        nll_base -= std::log(combine_prob_of(so.p_model, pu, uni.total > 0,
                                             lambda, eps, v_run));
        scorer.insert(so.h_query.data(), id);
        uni.observe(id);
    }

    KnnSweepResult res;
    res.baseline_nll = nll_base / double(T);
    for (size_t i = 0; i < k_values.size(); ++i) {
        KnnSweepPoint p;
        p.k = k_values[i];
        p.nll = nll_k[i] / double(T);
        p.perplexity = std::exp(p.nll);
        p.gap_nats = res.baseline_nll - p.nll;
        res.points.push_back(p);
    }
    return res;
}

std::vector<GrowthPoint> sweep_cache_growth(
    const RnnModel& m, const std::vector<std::string>& test_tokens,
    const EvalConfig& cfg, std::vector<uint64_t> checkpoints,
    IvfPqIndex* index) {
    require(!test_tokens.empty(), "eval: empty test stream");
    require(!checkpoints.empty(), "eval: sweep needs at least one checkpoint");
    for (size_t i = 1; i < checkpoints.size(); ++i)
        require(checkpoints[i] > checkpoints[i - 1],
                "eval: checkpoints must be strictly increasing");
    require(checkpoints.back() <= test_tokens.size(),
            "eval: checkpoint beyond stream length");
    validate_mixing(cfg);

    Vocabulary vocab = m.vocab;
    TokenStream ids = resolve_stream(test_tokens, vocab, true);
    const uint64_t T = ids.size();
    const double lambda = cfg.cache.lambda;
    const double eps = cfg.cache.epsilon_uniform;

    CacheScorer scorer(m, cfg, index);
    UnigramCounts uni;
    StreamEvaluator ev(m);

    std::vector<double> step_m(T), step_b(T);
    uint32_t v_run = m.v;
    for (uint64_t t = 0; t < T; ++t) {
        uint32_t id = ids[t];
        v_run = cfg.vocab_mode == VocabMode::online ? std::max(v_run, id + 1)
                                                    : vocab.size();
        StepOutcome so = ev.next(id);
        ScoreResult sc = scorer.score(so.h_query.data(), id, v_run);
        step_m[t] = -std::log(combine_prob_of(so.p_model, sc.pc, sc.present,
                                              lambda, eps, v_run));
        double pu = uni.total > 0 && id < uni.counts.size()
                        ? double(uni.counts[id]) / double(uni.total)
                        : 0.0;
        step_b[t] = -std::log(combine_prob_of(so.p_model, pu, uni.total > 0,
                                              lambda, eps, v_run));
        scorer.insert(so.h_query.data(), id);
        uni.observe(id);
    }

    std::vector<GrowthPoint> out;
    uint64_t prev = 0;
    for (uint64_t cp : checkpoints) {
        GrowthPoint gp;
        gp.t_begin = prev;
        gp.t_end = cp;
        if (cp > prev) {
            double sm = 0.0, sb = 0.0;
            for (uint64_t t = prev; t < cp; ++t) {
                sm += step_m[t];
                sb += step_b[t];
            }
            gp.method_nll = sm / double(cp - prev);
            gp.baseline_nll = sb / double(cp - prev);
            gp.gap_nats = gp.baseline_nll - gp.method_nll;
        }
        out.push_back(gp);
        prev = cp;
    }
    return out;
}

std::vector<BenchRow> bench_timing(const RnnModel& m,
                                   const std::vector<std::string>& test_tokens,
                                   const EvalConfig& cfg,
                                   const IvfPqIndex* index) {
    const Method methods[] = {Method::static_lm, Method::local_cache,
                              Method::unbounded_cache};
    std::vector<BenchRow> rows;
    for (Method meth : methods) {
        EvalConfig c2 = cfg;
        c2.method = meth;
        c2.tune_lambda = false;
        IvfPqIndex copy;
        IvfPqIndex* ip = nullptr;
        if (meth == Method::unbounded_cache &&
            cfg.backend == CacheBackendKind::ivfpq) {
            require(index, "eval: bench needs a trained index");
            copy = *index;
            ip = &copy;
        }
        EvalReport r = run_eval(m, test_tokens, c2, ip);
        rows.push_back({meth, r.wall_seconds, r.tokens_per_sec, r.perplexity});
    }
    return rows;
}

} // namespace uclm
