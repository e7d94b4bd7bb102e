#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "uclm/corpus.hpp"
#include "uclm/error.hpp"
#include "uclm/eval.hpp"
#include "uclm/exec.hpp"
#include "uclm/rng.hpp"
#include "uclm/rnnlm.hpp"
#include "uclm/synth.hpp"

using namespace uclm;

namespace {

std::string g17(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::vector<std::string> load_corpus(const std::string& path, bool shuffle,
                                     uint64_t seed,
                                     std::vector<size_t>* line_starts) {
    std::vector<std::string> lines = read_lines(path);
    if (shuffle) shuffle_lines(lines, seed);
    if (!line_starts) return tokenize_lines(lines);
    std::vector<std::string> toks;
    for (const std::string& l : lines) {
        std::vector<std::string> t = tokenize(l);
        if (t.empty()) continue;
        line_starts->push_back(toks.size());
        toks.insert(toks.end(), t.begin(), t.end());
    }
    return toks;
}

CellKind parse_cell(const std::string& s) {
    if (s == "elman") return CellKind::elman;
    if (s == "lstm") return CellKind::lstm;
    raise("unknown cell kind: " + s);
}

KernelKind parse_kernel(const std::string& s) {
    if (s == "epanechnikov") return KernelKind::epanechnikov;
    if (s == "gaussian") return KernelKind::gaussian;
    raise("unknown kernel: " + s);
}

Metric parse_metric(const std::string& s) {
    if (s == "l2") return Metric::l2;
    if (s == "ip") return Metric::inner_product;
    raise("unknown metric: " + s);
}

struct IndexFlags {
    uint32_t coarse = 64;
    uint32_t nprobe = 8;
    uint32_t pq_m = 8;
    uint32_t pq_b = 8;
    uint32_t kmeans_iters = 20;
    std::string metric = "l2";
    uint32_t max_states = 20000;
};

void add_index_flags(CLI::App* cmd, IndexFlags& f) {
    cmd->add_option("--coarse", f.coarse, "coarse centroids (inverted lists)");
    cmd->add_option("--nprobe", f.nprobe, "probed lists per query");
    cmd->add_option("--pq-m", f.pq_m, "product-quantizer sub-quantizers");
    cmd->add_option("--pq-b", f.pq_b, "bits per sub-quantizer index");
    cmd->add_option("--kmeans-iters", f.kmeans_iters, "k-means iterations");
    cmd->add_option("--metric", f.metric, "retrieval metric")
        ->check(CLI::IsMember({"l2", "ip"}));
    cmd->add_option("--max-index-states", f.max_states,
                    "cap on states used to fit the quantizers");
}

IvfPqConfig to_ivf(const IndexFlags& f, uint32_t k_nn) {
    IvfPqConfig c;
    c.c = f.coarse;
    c.nprobe = f.nprobe;
    c.m = f.pq_m;
    c.b = f.pq_b;
    c.kmeans_iters = f.kmeans_iters;
    c.k_nn = k_nn;
    c.metric = parse_metric(f.metric);
    return c;
}

struct EvalFlags {
    std::string model_path, test_path, train_path, index_path, report_path;
    std::string method = "unbounded_cache";
    std::string backend = "ivfpq";
    std::string kernel = "epanechnikov";
    std::string vocab_mode = "online";
    uint32_t k_nn = 128;
    double lambda = 0.2;
    double epsilon = 0.01;
    uint32_t local_capacity = 10000;
    double theta_flat = 0.3;
    bool reset_per_line = false;
    bool tune_lambda = false;
    bool shuffle_test = false;
    double tune_frac = 0.1;
    uint32_t chunk = 10000;
    uint64_t seed = 1;
    IndexFlags idx;
};

void add_eval_flags(CLI::App* cmd, EvalFlags& f, bool with_method) {
    cmd->add_option("--model", f.model_path, "model checkpoint")->required();
    cmd->add_option("--test", f.test_path, "test corpus, one sentence per line")
        ->required();
    cmd->add_option("--train", f.train_path,
                    "train corpus (fits the index quantizers when no --index)");
    cmd->add_option("--index", f.index_path, "prebuilt index file");
    cmd->add_option("--report", f.report_path, "write a per-token TSV report");
    if (with_method)
        cmd->add_option("--method", f.method, "scoring method")
            ->check(CLI::IsMember(
                {"static", "unigram", "local_cache", "unbounded_cache"}));
    cmd->add_option("--backend", f.backend, "neighbor search backend")
        ->check(CLI::IsMember({"ivfpq", "exact"}));
    cmd->add_option("--kernel", f.kernel, "cache kernel")
        ->check(CLI::IsMember({"epanechnikov", "gaussian"}));
    cmd->add_option("--vocab-mode", f.vocab_mode,
                    "extended-vocabulary growth mode")
        ->check(CLI::IsMember({"online", "upfront"}));
    cmd->add_option("--k", f.k_nn, "neighbors per query");
    cmd->add_option("--lambda", f.lambda, "cache interpolation weight");
    cmd->add_option("--epsilon", f.epsilon, "uniform smoothing weight");
    cmd->add_option("--local-capacity", f.local_capacity,
                    "local cache window size");
    cmd->add_option("--theta-flat", f.theta_flat,
                    "local cache flatness parameter");
    cmd->add_flag("--reset-per-line", f.reset_per_line,
                  "reset the recurrent state at line starts");
    cmd->add_flag("--tune-lambda", f.tune_lambda,
                  "grid-search lambda on the leading stream slice");
    cmd->add_option("--tune-frac", f.tune_frac, "tuning slice fraction");
    cmd->add_flag("--shuffle-test", f.shuffle_test,
                  "shuffle test sentences before evaluation");
    cmd->add_option("--chunk", f.chunk, "chunk size for segment perplexities");
    cmd->add_option("--seed", f.seed, "random seed");
    add_index_flags(cmd, f.idx);
}

struct EvalSetup {
    RnnModel model;
    std::vector<std::string> test_tokens;
    std::vector<size_t> line_starts;
    EvalConfig cfg;
    IvfPqIndex index;
    bool has_index = false;
};

EvalSetup prepare_eval(const EvalFlags& f) {
    EvalSetup s;
    s.model = RnnModel::load(f.model_path);
    s.test_tokens =
        load_corpus(f.test_path, f.shuffle_test, derive_seed(f.seed, 11),
                    f.reset_per_line ? &s.line_starts : nullptr);

    auto meth = method_from_name(f.method);
    if (!meth) raise("unknown method: " + f.method);
    s.cfg.method = *meth;
    s.cfg.backend = f.backend == "exact" ? CacheBackendKind::exact
                                         : CacheBackendKind::ivfpq;
    s.cfg.vocab_mode =
        f.vocab_mode == "upfront" ? VocabMode::upfront : VocabMode::online;
    s.cfg.cache.k_nn = f.k_nn;
    s.cfg.cache.kernel = parse_kernel(f.kernel);
    s.cfg.cache.lambda = f.lambda;
    s.cfg.cache.epsilon_uniform = f.epsilon;
    s.cfg.nprobe = f.idx.nprobe;
    s.cfg.local_capacity = f.local_capacity;
    s.cfg.theta_flat = f.theta_flat;
    s.cfg.reset_per_line = f.reset_per_line;
    s.cfg.tune_lambda = f.tune_lambda;
    s.cfg.tune_frac = f.tune_frac;
    s.cfg.chunk_size = f.chunk;

    bool needs_index = s.cfg.backend == CacheBackendKind::ivfpq;
    if (needs_index) {
        if (!f.index_path.empty()) {
            s.index = IvfPqIndex::load(f.index_path);
            s.has_index = true;
        } else if (!f.train_path.empty()) {
            std::vector<std::string> toks =
                load_corpus(f.train_path, false, f.seed, nullptr);
            Vocabulary vc = s.model.vocab;
            TokenStream ids = resolve_stream(toks, vc, true);
            s.index = build_index(s.model, ids, to_ivf(f.idx, f.k_nn),
                                  derive_seed(f.seed, 7), f.idx.max_states);
            s.has_index = true;
        }
    }
    return s;
}

IvfPqIndex* index_ptr(EvalSetup& s) {
    return s.has_index ? &s.index : nullptr;
}

std::vector<std::pair<std::string, std::string>> config_meta(
    const EvalFlags& f, const EvalSetup& s) {
    return {
        {"backend", f.backend},
        {"kernel", f.kernel},
        {"k_nn", std::to_string(f.k_nn)},
        {"nprobe", std::to_string(f.idx.nprobe)},
        {"lambda_config", g17(f.lambda)},
        {"epsilon", g17(f.epsilon)},
        {"vocab_mode", f.vocab_mode},
        {"reset_per_line", f.reset_per_line ? "1" : "0"},
        {"local_capacity", std::to_string(f.local_capacity)},
        {"theta_flat", g17(f.theta_flat)},
        {"model_cell", s.model.cell == CellKind::elman ? "elman" : "lstm"},
        {"model_dim", std::to_string(s.model.d)},
        {"model_vocab", std::to_string(s.model.v)},
        {"seed", std::to_string(f.seed)},
    };
}

void print_report(const EvalReport& r, Method method) {
    std::printf("method            %s\n", method_name(method));
    std::printf("tokens            %llu\n", (unsigned long long)r.tokens);
    std::printf("nll (nats/token)  %.6f\n", r.nll);
    std::printf("perplexity        %.4f\n", r.perplexity);
    std::printf("oov tokens        %llu (%.4f)\n",
                (unsigned long long)r.oov_tokens, r.oov_rate);
    std::printf("degenerate steps  %llu\n",
                (unsigned long long)r.degenerate_steps);
    std::printf("lambda used       %.4f\n", r.lambda_used);
    std::printf("wall seconds      %.3f\n", r.wall_seconds);
    std::printf("tokens/sec        %.1f\n", r.tokens_per_sec);
    if (r.chunk_nll.size() > 1) {
        std::printf("chunk perplexities:");
        for (double c : r.chunk_nll) std::printf(" %.2f", std::exp(c));
        std::printf("\n");
    }
}

int run_train(const std::string& train_path, const std::string& out_path,
              const std::string& vocab_out, const std::string& cell,
              uint32_t dim, double lr, uint32_t epochs, uint32_t bptt,
              uint32_t batch, uint64_t seed, double init_range,
              bool shuffle) {
    std::vector<std::string> toks =
        load_corpus(train_path, shuffle, derive_seed(seed, 11), nullptr);
    require(!toks.empty(), "train corpus is empty");
    Vocabulary vocab = build_vocab(toks);
    TokenStream ids = resolve_stream(toks, vocab, false);
    std::printf("corpus: %zu tokens, %u distinct words\n", ids.size(),
                vocab.size());

    TrainConfig tc;
    tc.cell = parse_cell(cell);
    tc.d = dim;
    tc.lr = lr;
    tc.epochs = epochs;
    tc.bptt_window = bptt;
    tc.batch_size = batch;
    tc.seed = seed;
    tc.init_range = init_range;

    std::vector<double> epoch_nll;
    RnnModel model = train_new_model(ids, vocab, tc, &epoch_nll);
    for (size_t e = 0; e < epoch_nll.size(); ++e)
        std::printf("epoch %2zu  nll %.4f  ppl %.2f\n", e + 1, epoch_nll[e],
                    std::exp(epoch_nll[e]));
    model.save(out_path);
    std::printf("saved checkpoint to %s\n", out_path.c_str());
    if (!vocab_out.empty()) {
        model.vocab.save(vocab_out);
        std::printf("saved vocabulary to %s\n", vocab_out.c_str());
    }
    return 0;
}

int run_eval_cmd(const EvalFlags& f) {
    EvalSetup s = prepare_eval(f);
    EvalReport rep = run_eval(s.model, s.test_tokens, s.cfg, index_ptr(s),
                              f.reset_per_line ? &s.line_starts : nullptr);
    print_report(rep, s.cfg.method);
    if (!f.report_path.empty()) {
        write_report(f.report_path,
                     report_to_tsv(rep, s.cfg.method, config_meta(f, s)));
        std::printf("wrote report to %s\n", f.report_path.c_str());
    }
    return 0;
}

int run_sweep_knn(const EvalFlags& f, const std::vector<uint32_t>& ks) {
    EvalFlags f2 = f;
    f2.method = "unbounded_cache";
    // the index must be able to answer the largest k
    uint32_t kmax = *std::max_element(ks.begin(), ks.end());
    f2.k_nn = std::max(f2.k_nn, kmax);
    EvalSetup s = prepare_eval(f2);
    KnnSweepResult res =
        sweep_knn(s.model, s.test_tokens, s.cfg, ks, index_ptr(s));
    std::printf("baseline (static+unigram) nll %.6f  ppl %.4f\n",
                res.baseline_nll, std::exp(res.baseline_nll));
    std::printf("%8s %12s %12s %12s\n", "k", "nll", "ppl", "gap(nats)");
    for (const KnnSweepPoint& p : res.points)
        std::printf("%8u %12.6f %12.4f %12.6f\n", p.k, p.nll, p.perplexity,
                    p.gap_nats);
    return 0;
}

int run_sweep_cache(const EvalFlags& f, const std::vector<uint64_t>& cps) {
    EvalSetup s = prepare_eval(f);
    std::vector<GrowthPoint> pts = sweep_cache_growth(
        s.model, s.test_tokens, s.cfg, cps, index_ptr(s));
    std::printf("%12s %12s %14s %14s %12s\n", "from", "to", "method_nll",
                "baseline_nll", "gap(nats)");
    for (const GrowthPoint& p : pts)
        std::printf("%12llu %12llu %14.6f %14.6f %12.6f\n",
                    (unsigned long long)p.t_begin,
                    (unsigned long long)p.t_end, p.method_nll, p.baseline_nll,
                    p.gap_nats);
    return 0;
}

int run_bench(const EvalFlags& f) {
    EvalSetup s = prepare_eval(f);
    std::vector<BenchRow> rows =
        bench_timing(s.model, s.test_tokens, s.cfg, index_ptr(s));
    std::printf("%-16s %12s %14s %12s\n", "method", "seconds", "tokens/sec",
                "ppl");
    for (const BenchRow& r : rows)
        std::printf("%-16s %12.3f %14.1f %12.4f\n", method_name(r.method),
                    r.wall_seconds, r.tokens_per_sec, r.perplexity);
    return 0;
}

int run_oov(const std::string& train_path, const std::string& test_path) {
    std::vector<std::string> train_toks =
        load_corpus(train_path, false, 0, nullptr);
    std::vector<std::string> test_toks =
        load_corpus(test_path, false, 0, nullptr);
    Vocabulary vocab = build_vocab(train_toks);
    OovReport r = oov_rate(vocab, test_toks);
    std::printf("train tokens       %zu\n", train_toks.size());
    std::printf("train vocabulary   %u\n", vocab.size());
    std::printf("test tokens        %llu\n", (unsigned long long)r.test_tokens);
    std::printf("test vocabulary    %u\n", r.test_vocab_size);
    std::printf("oov tokens         %llu\n", (unsigned long long)r.oov_tokens);
    std::printf("oov rate           %.6f\n", r.oov_rate);
    return 0;
}

int run_make_corpus(const DriftSpec& spec, const std::string& out_dir) {
    DriftCorpus c = make_drift_corpus(spec);
    write_drift_corpus(c, spec, out_dir);
    std::printf("train: %zu lines, %llu tokens\n", c.train_lines.size(),
                (unsigned long long)c.train_token_count);
    std::printf("test:  %zu lines, %llu tokens\n", c.test_lines.size(),
                (unsigned long long)c.test_token_count);
    std::printf("expected test oov rate vs train vocab: %.4f\n",
                c.expected_oov);
    std::printf("wrote %s/{train.txt,test.txt,meta.txt}\n", out_dir.c_str());
    return 0;
}

int run_index_build(const std::string& model_path,
                    const std::string& train_path, const std::string& out,
                    const IndexFlags& idx, uint32_t k_nn, uint64_t seed,
                    bool add_entries) {
    RnnModel model = RnnModel::load(model_path);
    std::vector<std::string> toks = load_corpus(train_path, false, 0, nullptr);
    Vocabulary vc = model.vocab;
    TokenStream ids = resolve_stream(toks, vc, true);
    IvfPqIndex index = build_index(model, ids, to_ivf(idx, k_nn),
                                   derive_seed(seed, 7), idx.max_states);
    if (add_entries) {
        std::vector<float> states = collect_states(model, ids, ids.size());
        for (size_t i = 0; i < ids.size(); ++i)
            index.add(i, states.data() + i * model.d, ids[i]);
    }
    index.save(out);
    std::printf("trained index: d=%u c=%u m=%u b=%u metric=%s entries=%llu\n",
                index.dim(), index.config().c, index.config().m,
                index.config().b, idx.metric.c_str(),
                (unsigned long long)index.count());
    std::printf("saved index to %s\n", out.c_str());
    return 0;
}

int run_index_inspect(const std::string& path) {
    IvfPqIndex index = IvfPqIndex::load(path);
    const IvfPqConfig& c = index.config();
    std::printf("dimension      %u\n", index.dim());
    std::printf("coarse lists   %u\n", c.c);
    std::printf("pq subspaces   %u x %u bits\n", c.m, c.b);
    std::printf("default nprobe %u\n", c.nprobe);
    std::printf("default k_nn   %u\n", c.k_nn);
    std::printf("metric         %s\n", c.metric == Metric::l2 ? "l2" : "ip");
    std::printf("entries        %llu\n", (unsigned long long)index.count());
    size_t mn = SIZE_MAX, mx = 0;
    for (uint32_t l = 0; l < c.c; ++l) {
        size_t n = index.list_size(l);
        mn = std::min(mn, n);
        mx = std::max(mx, n);
    }
    std::printf("list sizes     min %zu  max %zu  mean %.1f\n", mn, mx,
                double(index.count()) / double(c.c));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"unbounded-cache language model toolkit"};
    app.require_subcommand(1);

    int threads = 0;
    bool serial = false;
    app.add_option("--threads", threads, "OpenMP thread count (0 = default)");
    app.add_flag("--serial", serial, "run all kernels serially");

    // train
    std::string tr_train, tr_out = "model.bin", tr_vocab_out,
                tr_cell = "lstm";
    uint32_t tr_dim = 64, tr_epochs = 10, tr_bptt = 20, tr_batch = 1;
    double tr_lr = 0.2, tr_init = 0.05;
    uint64_t tr_seed = 1;
    bool tr_shuffle = false;
    CLI::App* ctrain = app.add_subcommand("train", "train a checkpoint");
    ctrain->add_option("--train", tr_train, "training corpus")->required();
    ctrain->add_option("--out", tr_out, "checkpoint output path");
    ctrain->add_option("--vocab-out", tr_vocab_out, "vocabulary output path");
    ctrain->add_option("--cell", tr_cell, "recurrent cell")
        ->check(CLI::IsMember({"elman", "lstm"}));
    ctrain->add_option("--dim", tr_dim, "hidden dimension");
    ctrain->add_option("--lr", tr_lr, "adagrad learning rate");
    ctrain->add_option("--epochs", tr_epochs, "training epochs");
    ctrain->add_option("--bptt", tr_bptt, "truncated BPTT window");
    ctrain->add_option("--batch", tr_batch, "parallel stream shards");
    ctrain->add_option("--seed", tr_seed, "random seed");
    ctrain->add_option("--init-range", tr_init, "uniform init range");
    ctrain->add_flag("--shuffle-train", tr_shuffle,
                     "shuffle training sentences once before training");

    // eval
    EvalFlags ef;
    CLI::App* ceval =
        app.add_subcommand("eval", "streaming perplexity evaluation");
    add_eval_flags(ceval, ef, true);

    // sweep-knn
    EvalFlags kf;
    std::vector<uint32_t> k_values{1, 2, 4, 8, 16, 32, 64, 128};
    CLI::App* cknn = app.add_subcommand(
        "sweep-knn", "entropy gap vs static+unigram across neighbor counts");
    add_eval_flags(cknn, kf, false);
    cknn->add_option("--k-values", k_values, "neighbor counts to sweep")
        ->delimiter(',');

    // sweep-cache
    EvalFlags gf;
    std::vector<uint64_t> checkpoints{0, 10000, 100000};
    CLI::App* cgrow = app.add_subcommand(
        "sweep-cache", "entropy gap across stream segments as the cache fills");
    add_eval_flags(cgrow, gf, true);
    cgrow->add_option("--checkpoints", checkpoints,
                      "segment boundaries (token counts)")
        ->delimiter(',');

    // bench
    EvalFlags bf;
    CLI::App* cbench =
        app.add_subcommand("bench", "time static vs cache methods");
    add_eval_flags(cbench, bf, false);

    // oov
    std::string ov_train, ov_test;
    CLI::App* coov =
        app.add_subcommand("oov", "out-of-vocabulary statistics");
    coov->add_option("--train", ov_train, "training corpus")->required();
    coov->add_option("--test", ov_test, "test corpus")->required();

    // make-drift-corpus
    DriftSpec spec;
    std::string mk_out = "corpus";
    CLI::App* cmk = app.add_subcommand("make-drift-corpus",
                                       "generate a two-source Markov corpus");
    cmk->add_option("--out", mk_out, "output directory");
    cmk->add_option("--vocab-a", spec.vocab_a, "source A vocabulary size");
    cmk->add_option("--vocab-b", spec.vocab_b, "source B vocabulary size");
    cmk->add_option("--disjoint", spec.disjoint,
                    "fraction of B's vocabulary unseen in A");
    cmk->add_option("--branch", spec.branch, "successor slots per context");
    cmk->add_option("--train-tokens", spec.train_tokens, "train stream size");
    cmk->add_option("--test-tokens", spec.test_tokens, "test stream size");
    cmk->add_option("--switch-frac", spec.switch_frac,
                    "leading test fraction from source A");
    cmk->add_option("--sentence-len", spec.sentence_len, "tokens per line");
    cmk->add_option("--pool", spec.pool,
                    "fixed sentence pool size (0 = free generation)");
    cmk->add_flag("--shuffle-test", spec.shuffle_test,
                  "shuffle test sentence order");
    cmk->add_option("--seed", spec.seed, "random seed");

    // index build/inspect
    CLI::App* cindex = app.add_subcommand("index", "index utilities");
    cindex->require_subcommand(1);
    std::string ib_model, ib_train, ib_out = "index.bin";
    IndexFlags ib_flags;
    uint32_t ib_k = 128;
    uint64_t ib_seed = 1;
    bool ib_add = false;
    CLI::App* cib = cindex->add_subcommand(
        "build", "fit index quantizers on model states");
    cib->add_option("--model", ib_model, "model checkpoint")->required();
    cib->add_option("--train", ib_train, "training corpus")->required();
    cib->add_option("--out", ib_out, "index output path");
    cib->add_option("--k", ib_k, "default neighbors per query");
    cib->add_option("--seed", ib_seed, "random seed");
    cib->add_flag("--add-entries", ib_add,
                  "also insert the training-stream states");
    add_index_flags(cib, ib_flags);
    std::string ii_path;
    CLI::App* cii = cindex->add_subcommand("inspect", "print index header");
    cii->add_option("--index", ii_path, "index file")->required();

    CLI11_PARSE(app, argc, argv);

    if (serial) set_default_exec(Exec::serial);
    if (threads > 0) set_num_threads(threads);

    try {
        if (ctrain->parsed())
            return run_train(tr_train, tr_out, tr_vocab_out, tr_cell, tr_dim,
                             tr_lr, tr_epochs, tr_bptt, tr_batch, tr_seed,
                             tr_init, tr_shuffle);
        if (ceval->parsed()) return run_eval_cmd(ef);
        if (cknn->parsed()) return run_sweep_knn(kf, k_values);
        if (cgrow->parsed()) return run_sweep_cache(gf, checkpoints);
        if (cbench->parsed()) return run_bench(bf);
        if (coov->parsed()) return run_oov(ov_train, ov_test);
        if (cmk->parsed()) return run_make_corpus(spec, mk_out);
        if (cindex->parsed()) {
            if (cib->parsed())
                return run_index_build(ib_model, ib_train, ib_out, ib_flags,
                                       ib_k, ib_seed, ib_add);
            if (cii->parsed()) return run_index_inspect(ii_path);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
