#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "uclm/error.hpp"

namespace uclm {

// Open-vocabulary word <-> id map. Ids are dense, assigned by first
// occurrence and never renumbered, so the vocabulary can grow online while
// streams resolved against it stay valid. There is no reserved <unk> entry.
class Vocabulary {
public:
    uint32_t add(std::string_view word);
    std::optional<uint32_t> lookup(std::string_view word) const;
    const std::string& word_of(uint32_t id) const;
    uint32_t size() const { return static_cast<uint32_t>(words_.size()); }

    void save(const std::string& path) const;           // one token per line, id order
    static Vocabulary load(const std::string& path);

private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, uint32_t> index_;
};

using TokenStream = std::vector<uint32_t>;

struct OovReport {
    uint32_t test_vocab_size = 0;   // distinct tokens in the test stream
    uint64_t test_tokens = 0;
    uint64_t oov_tokens = 0;        // occurrences absent from the train vocab
    double oov_rate = 0.0;
};

// Rule-based tokenizer: validate UTF-8, lowercase (Basic Latin and Latin-1;
// other scripts pass through, input is assumed precomposed), split on Unicode
// whitespace, then detach leading/trailing punctuation as separate tokens.
std::vector<std::string> tokenize(std::string_view text);

Vocabulary build_vocab(const std::vector<std::string>& tokens);

// Map token strings to ids. With extend=true unseen tokens are appended to
// the vocabulary; otherwise an unseen token is an error.
TokenStream resolve_stream(const std::vector<std::string>& tokens,
                           Vocabulary& vocab, bool extend);

OovReport oov_rate(const Vocabulary& train_vocab,
                   const std::vector<std::string>& test_tokens);

// Plain-text corpus: UTF-8, one sentence per line, processed in file order.
std::vector<std::string> read_lines(const std::string& path);
void shuffle_lines(std::vector<std::string>& lines, uint64_t seed);
std::vector<std::string> tokenize_lines(const std::vector<std::string>& lines);

} // namespace uclm
