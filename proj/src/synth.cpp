#include "uclm/synth.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "uclm/corpus.hpp"
#include "uclm/error.hpp"
#include "uclm/rng.hpp"

namespace uclm {

namespace {

struct MarkovSource {
    std::vector<std::string> vocab;
    uint32_t branch = 1;
    std::vector<uint32_t> first; // V x branch: successors of a single word
    std::vector<uint32_t> pairs; // V*V x branch: successors of a word pair

    uint32_t V() const { return uint32_t(vocab.size()); }

    std::string sentence(Rng& rng, uint32_t len) const {
        uint32_t w1 = uint32_t(rng.next_below(V()));
        std::string out = vocab[w1];
        if (len == 1) return out;
        uint32_t w2 = first[size_t(w1) * branch + rng.next_below(branch)];
        out += ' ';
        out += vocab[w2];
        for (uint32_t i = 2; i < len; ++i) {
            uint32_t w3 =
                pairs[(size_t(w1) * V() + w2) * branch + rng.next_below(branch)];
            out += ' ';
            out += vocab[w3];
            w1 = w2;
            w2 = w3;
        }
        return out;
    }
};

MarkovSource build_source(std::vector<std::string> vocab, uint32_t branch,
                          uint64_t seed) {
    MarkovSource s;
    s.vocab = std::move(vocab);
    s.branch = branch;
    Rng rng(seed);
    s.first.resize(size_t(s.V()) * branch);
    for (uint32_t& w : s.first) w = uint32_t(rng.next_below(s.V()));
    s.pairs.resize(size_t(s.V()) * s.V() * branch);
    for (uint32_t& w : s.pairs) w = uint32_t(rng.next_below(s.V()));
    return s;
}

std::string word_name(const char* prefix, uint32_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%s%03u", prefix, i);
    return buf;
}

uint64_t tokens_of(const std::string& line) {
    if (line.empty()) return 0;
    uint64_t n = 1;
    for (char ch : line)
        if (ch == ' ') ++n;
    return n;
}

// free generation until token_target tokens are emitted
uint64_t emit_free(const MarkovSource& src, Rng& rng, uint64_t token_target,
                   uint32_t sentence_len, std::vector<std::string>& lines) {
    uint64_t emitted = 0;
    while (emitted < token_target) {
        lines.push_back(src.sentence(rng, sentence_len));
        emitted += sentence_len;
    }
    return emitted;
}

// cycle a fixed sentence pool until token_target tokens are emitted
uint64_t emit_pool(const std::vector<std::string>& pool, uint64_t token_target,
                   std::vector<std::string>& lines) {
    uint64_t emitted = 0;
    size_t cursor = 0;
    while (emitted < token_target) {
        const std::string& s = pool[cursor % pool.size()];
        lines.push_back(s);
        emitted += tokens_of(s);
        ++cursor;
    }
    return emitted;
}

} // namespace

DriftCorpus make_drift_corpus(const DriftSpec& spec) {
    require(spec.vocab_a >= 2 && spec.vocab_b >= 2,
            "synth: each vocabulary needs >= 2 words");
    require(spec.branch >= 1, "synth: branch must be >= 1");
    require(spec.disjoint >= 0.0 && spec.disjoint <= 1.0,
            "synth: disjoint must be in [0,1]");
    require(spec.switch_frac >= 0.0 && spec.switch_frac <= 1.0,
            "synth: switch_frac must be in [0,1]");
    require(spec.sentence_len >= 1, "synth: sentence_len must be >= 1");
    require(spec.train_tokens >= 1 && spec.test_tokens >= 1,
            "synth: token counts must be >= 1");

    uint32_t shared =
        uint32_t(std::lround((1.0 - spec.disjoint) * spec.vocab_b));
    require(shared <= spec.vocab_a,
            "synth: vocab_a too small for the requested overlap");

    std::vector<std::string> va, vb;
    for (uint32_t i = 0; i < shared; ++i) va.push_back(word_name("sh", i));
    for (uint32_t i = 0; i < spec.vocab_a - shared; ++i)
        va.push_back(word_name("aa", i));
    for (uint32_t i = 0; i < shared; ++i) vb.push_back(word_name("sh", i));
    for (uint32_t i = 0; i < spec.vocab_b - shared; ++i)
        vb.push_back(word_name("bb", i));

    MarkovSource src_a = build_source(va, spec.branch, derive_seed(spec.seed, 1));
    MarkovSource src_b =
        (shared == spec.vocab_a && spec.vocab_a == spec.vocab_b)
            ? src_a
            : build_source(vb, spec.branch, derive_seed(spec.seed, 2));

    DriftCorpus out;
    Rng train_rng(derive_seed(spec.seed, 3));
    out.train_token_count = emit_free(src_a, train_rng, spec.train_tokens,
                                      spec.sentence_len, out.train_lines);

    uint64_t a_target = uint64_t(std::llround(spec.switch_frac *
                                              double(spec.test_tokens)));
    uint64_t b_target = spec.test_tokens > a_target
                            ? spec.test_tokens - a_target
                            : 0;
    if (spec.pool > 0) {
        std::vector<std::string> pool_a, pool_b;
        Rng pa(derive_seed(spec.seed, 6)), pb(derive_seed(spec.seed, 7));
        for (uint32_t i = 0; i < spec.pool; ++i)
            pool_a.push_back(src_a.sentence(pa, spec.sentence_len));
        for (uint32_t i = 0; i < spec.pool; ++i)
            pool_b.push_back(src_b.sentence(pb, spec.sentence_len));
        if (a_target > 0)
            out.test_token_count += emit_pool(pool_a, a_target, out.test_lines);
        if (b_target > 0)
            out.test_token_count += emit_pool(pool_b, b_target, out.test_lines);
    } else {
        Rng ta(derive_seed(spec.seed, 4)), tb(derive_seed(spec.seed, 5));
        if (a_target > 0)
            out.test_token_count += emit_free(src_a, ta, a_target,
                                              spec.sentence_len, out.test_lines);
        if (b_target > 0)
            out.test_token_count += emit_free(src_b, tb, b_target,
                                              spec.sentence_len, out.test_lines);
    }
    if (spec.shuffle_test)
        shuffle_lines(out.test_lines, derive_seed(spec.seed, 8));

    out.expected_oov = (1.0 - spec.switch_frac) *
                       double(spec.vocab_b - shared) / double(spec.vocab_b);
    return out;
}

void write_drift_corpus(const DriftCorpus& c, const DriftSpec& spec,
                        const std::string& dir) {
    std::filesystem::create_directories(dir);
    auto write_lines_file = [](const std::string& path,
                               const std::vector<std::string>& lines) {
        std::ofstream os(path, std::ios::binary);
        if (!os) raise("synth: cannot open " + path + " for writing");
        for (const std::string& l : lines) os << l << '\n';
        if (!os) raise("synth: write failed for " + path);
    };
    write_lines_file(dir + "/train.txt", c.train_lines);
    write_lines_file(dir + "/test.txt", c.test_lines);

    std::ofstream os(dir + "/meta.txt", std::ios::binary);
    if (!os) raise("synth: cannot open " + dir + "/meta.txt for writing");
    char buf[64];
    auto num = [&](double x) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
        return std::string(buf);
    };
    os << "vocab_a=" << spec.vocab_a << '\n'
       << "vocab_b=" << spec.vocab_b << '\n'
       << "disjoint=" << num(spec.disjoint) << '\n'
       << "branch=" << spec.branch << '\n'
       << "train_tokens=" << c.train_token_count << '\n'
       << "test_tokens=" << c.test_token_count << '\n'
       << "switch_frac=" << num(spec.switch_frac) << '\n'
       << "sentence_len=" << spec.sentence_len << '\n'
       << "pool=" << spec.pool << '\n'
       << "shuffle_test=" << (spec.shuffle_test ? 1 : 0) << '\n'
       << "seed=" << spec.seed << '\n'
       << "expected_oov=" << num(c.expected_oov) << '\n';
    if (!os) raise("synth: write failed for " + dir + "/meta.txt");
}

} // namespace uclm
