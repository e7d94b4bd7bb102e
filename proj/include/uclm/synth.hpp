#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace uclm {

// Two order-2 Markov sources with controllable vocabulary overlap: the test
// stream starts in the training source (A) and switches to the second one
// (B), emulating a domain change with out-of-vocabulary words.
struct DriftSpec {
    uint32_t vocab_a = 50;
    uint32_t vocab_b = 50;
    // fraction of B's vocabulary unseen in A; 0 with vocab_a == vocab_b
    // makes the two sources fully identical (transitions included)
    double disjoint = 1.0;
    uint32_t branch = 2; // successor slots per context (drawn with replacement)
    uint64_t train_tokens = 20000;
    uint64_t test_tokens = 10000;
    double switch_frac = 0.5; // leading fraction of the test stream from A
    uint32_t sentence_len = 12;
    // > 0: test sentences come from fixed per-source pools of this size,
    // cycled in order (a repetitive stream); 0: free generation
    uint32_t pool = 0;
    bool shuffle_test = false; // shuffle test sentence order after generation
    uint64_t seed = 1;
};

struct DriftCorpus {
    std::vector<std::string> train_lines;
    std::vector<std::string> test_lines;
    uint64_t train_token_count = 0;
    uint64_t test_token_count = 0;
    // expectation of the test OOV rate vs the train vocabulary, taken over
    // the generator's randomness (per-seed rates vary around it)
    double expected_oov = 0.0;
};

DriftCorpus make_drift_corpus(const DriftSpec& spec);

// writes train.txt, test.txt and meta.txt (key=value lines) under dir
void write_drift_corpus(const DriftCorpus& c, const DriftSpec& spec,
                        const std::string& dir);

} // namespace uclm
