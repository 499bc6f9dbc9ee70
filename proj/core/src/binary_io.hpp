#pragma once

// Little-endian primitives for the index file formats.

#include "docqa/errors.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

namespace docqa::detail {

template <typename UInt>
void write_le(std::ostream& out, UInt value)
{
    std::array<char, sizeof(UInt)> buf{};
    for (std::size_t i = 0; i < sizeof(UInt); ++i) {
        buf[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
    }
    out.write(buf.data(), buf.size());
}

template <typename UInt>
UInt read_le(std::istream& in, const char* what)
{
    std::array<unsigned char, sizeof(UInt)> buf{};
    in.read(reinterpret_cast<char*>(buf.data()), buf.size());
    if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
        throw CorruptionError(std::string("unexpected end of file reading ") + what);
    }
    UInt value = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) {
        value |= static_cast<UInt>(buf[i]) << (8 * i);
    }
    return value;
}

inline void write_f32(std::ostream& out, float v)
{
    write_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
}

inline float read_f32(std::istream& in, const char* what)
{
    return std::bit_cast<float>(read_le<std::uint32_t>(in, what));
}

inline void write_f64(std::ostream& out, double v)
{
    write_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
}

inline double read_f64(std::istream& in, const char* what)
{
    return std::bit_cast<double>(read_le<std::uint64_t>(in, what));
}

inline void write_string(std::ostream& out, const std::string& s)
{
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in, const char* what, std::uint32_t max_len = 1u << 24)
{
    const auto len = read_le<std::uint32_t>(in, what);
    if (len > max_len) {
        throw CorruptionError(std::string("implausible string length reading ") + what);
    }
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (in.gcount() != static_cast<std::streamsize>(len)) {
        throw CorruptionError(std::string("unexpected end of file reading ") + what);
    }
    return s;
}

inline void write_magic(std::ostream& out, const char (&magic)[5])
{
    out.write(magic, 4);
}

inline void expect_magic(std::istream& in, const char (&magic)[5], const char* what)
{
    char buf[4] = {};
    in.read(buf, 4);
    if (in.gcount() != 4 || std::memcmp(buf, magic, 4) != 0) {
        throw CorruptionError(std::string("bad magic: not a ") + what + " file");
    }
}

}  // namespace docqa::detail
