#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "mrfusion/util/errors.hpp"

// Little-endian primitives shared by the binary file formats.
namespace mrfusion::io {

namespace detail {
template <typename U>
U to_little(U v) {
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        U out{};
        for (std::size_t i = 0; i < sizeof(U); ++i) out = (out << 8) | ((v >> (8 * i)) & 0xFF);
        return out;
    }
}
}  // namespace detail

inline void write_u64(std::ostream& os, std::uint64_t v) {
    v = detail::to_little(v);
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_u8(std::ostream& os, std::uint8_t v) { os.put(static_cast<char>(v)); }

inline void write_string(std::ostream& os, const std::string& s) {
    write_u64(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

/// Writes 32-bit values (float or int32) little-endian.
template <typename V>
void write_array32(std::ostream& os, const V* data, std::size_t n) {
    static_assert(sizeof(V) == 4);
    if constexpr (std::endian::native == std::endian::little) {
        os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * 4));
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            std::uint32_t u;
            std::memcpy(&u, data + i, 4);
            u = detail::to_little(u);
            os.write(reinterpret_cast<const char*>(&u), 4);
        }
    }
}

inline void write_f64(std::ostream& os, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    write_u64(os, u);
}

inline void read_exact(std::istream& is, char* dst, std::size_t n, const char* what) {
    is.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n)
        throw FormatError(std::string("truncated payload while reading ") + what);
}

inline std::uint64_t read_u64(std::istream& is, const char* what) {
    std::uint64_t v;
    read_exact(is, reinterpret_cast<char*>(&v), sizeof v, what);
    return detail::to_little(v);
}

inline std::uint8_t read_u8(std::istream& is, const char* what) {
    char c;
    read_exact(is, &c, 1, what);
    return static_cast<std::uint8_t>(c);
}

inline double read_f64(std::istream& is, const char* what) {
    const std::uint64_t u = read_u64(is, what);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

inline std::string read_string(std::istream& is, std::uint64_t max_len, const char* what) {
    const auto n = read_u64(is, what);
    if (n > max_len) throw FormatError(std::string("implausible string length in ") + what);
    std::string s(n, '\0');
    read_exact(is, s.data(), n, what);
    return s;
}

template <typename V>
void read_array32(std::istream& is, V* data, std::size_t n, const char* what) {
    static_assert(sizeof(V) == 4);
    read_exact(is, reinterpret_cast<char*>(data), n * 4, what);
    if constexpr (std::endian::native != std::endian::little) {
        for (std::size_t i = 0; i < n; ++i) {
            std::uint32_t u;
            std::memcpy(&u, data + i, 4);
            u = detail::to_little(u);
            std::memcpy(data + i, &u, 4);
        }
    }
}

inline void expect_magic(std::istream& is, const std::string& magic, const std::string& path) {
    std::string got(magic.size(), '\0');
    is.read(got.data(), static_cast<std::streamsize>(magic.size()));
    if (static_cast<std::size_t>(is.gcount()) != magic.size() || got != magic)
        throw FormatError("bad magic in " + path);
}

}  // namespace mrfusion::io
