#pragma once

#include <stdexcept>
#include <string>

namespace uclm {

// All recoverable failures (bad input files, dimension mismatches, invalid
// configs) are reported through this type. Internal contract violations use
// assert().
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

[[noreturn]] inline void raise(const std::string& msg) {
    throw Error(msg);
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) raise(msg);
}

} // namespace uclm
