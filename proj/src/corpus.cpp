#include "uclm/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "uclm/rng.hpp"

namespace uclm {

// ---------------------------------------------------------------------------
// Vocabulary

uint32_t Vocabulary::add(std::string_view word) {
    auto it = index_.find(std::string(word));
    if (it != index_.end()) return it->second;
    uint32_t id = static_cast<uint32_t>(words_.size());
    words_.emplace_back(word);
    index_.emplace(words_.back(), id);
    return id;
}

std::optional<uint32_t> Vocabulary::lookup(std::string_view word) const {
    auto it = index_.find(std::string(word));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

const std::string& Vocabulary::word_of(uint32_t id) const {
    require(id < words_.size(), "vocabulary: id out of range");
    return words_[id];
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    require(os.good(), "vocabulary: cannot open " + path + " for writing");
    for (const auto& w : words_) os << w << '\n';
    require(os.good(), "vocabulary: write failed for " + path);
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(is.good(), "vocabulary: cannot open " + path);
    Vocabulary v;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        v.add(line);
    }
    return v;
}

// ---------------------------------------------------------------------------
// Tokenizer

namespace {

bool is_space_cp(uint32_t cp) {
    switch (cp) {
        case 0x09: case 0x0a: case 0x0b: case 0x0c: case 0x0d:
        case 0x20: case 0x85: case 0xa0: case 0x1680:
        case 0x2028: case 0x2029: case 0x202f: case 0x205f: case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200a;
    }
}

bool is_punct_cp(uint32_t cp) {
    if (cp < 0x80) {
        return (cp >= 0x21 && cp <= 0x2f) || (cp >= 0x3a && cp <= 0x40) ||
               (cp >= 0x5b && cp <= 0x60) || (cp >= 0x7b && cp <= 0x7e);
    }
    // Latin-1 punctuation and the General Punctuation block.
    switch (cp) {
        case 0xa1: case 0xa7: case 0xab: case 0xb6: case 0xb7: case 0xbb: case 0xbf:
            return true;
        default:
            return cp >= 0x2010 && cp <= 0x2027;
    }
}

uint32_t lower_cp(uint32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
    if (cp >= 0xc0 && cp <= 0xde && cp != 0xd7) return cp + 0x20;
    return cp;
}

void append_utf8(std::string& out, uint32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else {
        out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    }
}

// Decode one code point, validating the encoding. `pos` advances past it.
uint32_t decode_utf8(std::string_view s, size_t& pos) {
    auto fail = [&]() -> uint32_t {
        raise("corpus: invalid utf-8 at byte " + std::to_string(pos));
    };
    uint8_t b0 = static_cast<uint8_t>(s[pos]);
    if (b0 < 0x80) { pos += 1; return b0; }
    int len;
    uint32_t cp;
    if ((b0 & 0xe0) == 0xc0) { len = 2; cp = b0 & 0x1f; }
    else if ((b0 & 0xf0) == 0xe0) { len = 3; cp = b0 & 0x0f; }
    else if ((b0 & 0xf8) == 0xf0) { len = 4; cp = b0 & 0x07; }
    else return fail();
    if (pos + len > s.size()) return fail();
    for (int i = 1; i < len; ++i) {
        uint8_t b = static_cast<uint8_t>(s[pos + i]);
        if ((b & 0xc0) != 0x80) return fail();
        cp = (cp << 6) | (b & 0x3f);
    }
    // overlong forms, surrogates, out of range
    static const uint32_t min_cp[5] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < min_cp[len] || cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff))
        return fail();
    pos += len;
    return cp;
}

} // namespace

std::vector<std::string> tokenize(std::string_view text) {
    // decode + lowercase into code points, remembering word boundaries
    std::vector<std::string> out;
    std::vector<uint32_t> chunk; // code points of the current whitespace-free chunk

    auto flush = [&]() {
        if (chunk.empty()) return;
        size_t lo = 0, hi = chunk.size();
        while (lo < hi && is_punct_cp(chunk[lo])) ++lo;
        while (hi > lo && is_punct_cp(chunk[hi - 1])) --hi;
        auto emit_one = [&](uint32_t cp) {
            std::string t;
            append_utf8(t, cp);
            out.push_back(std::move(t));
        };
        for (size_t i = 0; i < lo; ++i) emit_one(chunk[i]);
        if (hi > lo) {
            std::string core;
            for (size_t i = lo; i < hi; ++i) append_utf8(core, chunk[i]);
            out.push_back(std::move(core));
        }
        for (size_t i = hi; i < chunk.size(); ++i) emit_one(chunk[i]);
        chunk.clear();
    };

    size_t pos = 0;
    while (pos < text.size()) {
        uint32_t cp = decode_utf8(text, pos);
        if (is_space_cp(cp)) {
            flush();
        } else {
            chunk.push_back(lower_cp(cp));
        }
    }
    flush();
    return out;
}

Vocabulary build_vocab(const std::vector<std::string>& tokens) {
    Vocabulary v;
    for (const auto& t : tokens) v.add(t);
    return v;
}

TokenStream resolve_stream(const std::vector<std::string>& tokens,
                           Vocabulary& vocab, bool extend) {
    TokenStream ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) {
        if (extend) {
            ids.push_back(vocab.add(t));
        } else {
            auto id = vocab.lookup(t);
            require(id.has_value(), "corpus: token '" + t + "' not in vocabulary");
            ids.push_back(*id);
        }
    }
    return ids;
}

OovReport oov_rate(const Vocabulary& train_vocab,
                   const std::vector<std::string>& test_tokens) {
    require(!test_tokens.empty(), "oov_rate: empty test stream");
    OovReport r;
    std::unordered_set<std::string> distinct;
    for (const auto& t : test_tokens) {
        distinct.insert(t);
        ++r.test_tokens;
        if (!train_vocab.lookup(t)) ++r.oov_tokens;
    }
    r.test_vocab_size = static_cast<uint32_t>(distinct.size());
    r.oov_rate = static_cast<double>(r.oov_tokens) / static_cast<double>(r.test_tokens);
    return r;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(is.good(), "corpus: cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

void shuffle_lines(std::vector<std::string>& lines, uint64_t seed) {
    Rng rng(seed);
    for (size_t i = lines.size(); i > 1; --i) {
        size_t j = rng.next_below(i);
        std::swap(lines[i - 1], lines[j]);
    }
}

std::vector<std::string> tokenize_lines(const std::vector<std::string>& lines) {
    std::vector<std::string> tokens;
    for (const auto& l : lines) {
        auto t = tokenize(l);
        tokens.insert(tokens.end(), std::make_move_iterator(t.begin()),
                      std::make_move_iterator(t.end()));
    }
    return tokens;
}

} // namespace uclm
