#pragma once

#include <cstdint>
#include <random>

namespace uclm {

// Seeded RNG with hand-rolled distributions. std::mt19937_64 is bit-exact by
// the standard, but the standard distributions are not, so uniform draws are
// mapped manually to keep every seeded artifact reproducible across builds.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // uniform in [0, 1)
    double next_double() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // uniform in [0, n)
    uint64_t next_below(uint64_t n) {
        // rejection sampling, unbiased
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v;
        do {
            v = eng_();
        } while (v >= limit);
        return v % n;
    }

private:
    std::mt19937_64 eng_;
};

// stable sub-seed derivation (splitmix-style mix)
inline uint64_t derive_seed(uint64_t seed, uint64_t salt) {
    uint64_t z = seed + (salt + 1) * 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

} // namespace uclm
