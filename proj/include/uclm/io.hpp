#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "uclm/error.hpp"

// Binary file helpers. All on-disk formats are little-endian; we write native
// byte order and refuse to build on big-endian hosts.

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian");

namespace uclm::io {

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
    if (!os) raise("io: write failed");
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
    static_assert(std::is_trivially_copyable_v<T>);
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) raise(std::string("io: truncated input reading ") + what);
    return v;
}

template <typename T>
void write_array(std::ostream& os, const T* data, size_t n) {
    static_assert(std::is_trivially_copyable_v<T>);
    os.write(reinterpret_cast<const char*>(data), sizeof(T) * n);
    if (!os) raise("io: write failed");
}

template <typename T>
void read_array(std::istream& is, T* data, size_t n, const char* what) {
    static_assert(std::is_trivially_copyable_v<T>);
    is.read(reinterpret_cast<char*>(data), sizeof(T) * n);
    if (!is) raise(std::string("io: truncated input reading ") + what);
}

inline void write_magic(std::ostream& os, const char magic[4]) {
    os.write(magic, 4);
    if (!os) raise("io: write failed");
}

inline void check_magic(std::istream& is, const char magic[4], const char* what) {
    char buf[4];
    is.read(buf, 4);
    if (!is || std::memcmp(buf, magic, 4) != 0)
        raise(std::string("io: bad magic, not a ") + what + " file");
}

inline void write_string(std::ostream& os, const std::string& s) {
    write_pod<uint32_t>(os, static_cast<uint32_t>(s.size()));
    write_array(os, s.data(), s.size());
}

inline std::string read_string(std::istream& is, const char* what) {
    uint32_t n = read_pod<uint32_t>(is, what);
    std::string s(n, '\0');
    read_array(is, s.data(), n, what);
    return s;
}

} // namespace uclm::io
