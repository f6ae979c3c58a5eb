#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace strobe {

// Big-endian field access; all wire formats here are network byte order.

inline uint16_t get_be16(std::span<const uint8_t> b, size_t off) {
    return uint16_t(uint16_t(b[off]) << 8 | b[off + 1]);
}

inline uint32_t get_be32(std::span<const uint8_t> b, size_t off) {
    return uint32_t(b[off]) << 24 | uint32_t(b[off + 1]) << 16 | uint32_t(b[off + 2]) << 8 |
           uint32_t(b[off + 3]);
}

inline void put_be16(std::span<uint8_t> b, size_t off, uint16_t v) {
    b[off] = uint8_t(v >> 8);
    b[off + 1] = uint8_t(v);
}

inline void put_be32(std::span<uint8_t> b, size_t off, uint32_t v) {
    b[off] = uint8_t(v >> 24);
    b[off + 1] = uint8_t(v >> 16);
    b[off + 2] = uint8_t(v >> 8);
    b[off + 3] = uint8_t(v);
}

inline uint16_t get_be16(std::span<const uint8_t> b) { return get_be16(b, 0); }
inline uint32_t get_be32(std::span<const uint8_t> b) { return get_be32(b, 0); }
inline void put_be16(std::span<uint8_t> b, uint16_t v) { put_be16(b, 0, v); }
inline void put_be32(std::span<uint8_t> b, uint32_t v) { put_be32(b, 0, v); }

inline std::string to_hex(std::span<const uint8_t> bytes) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (uint8_t b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xF]);
    }
    return out;
}

inline std::optional<std::vector<uint8_t>> from_hex(std::string_view s) {
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    if (s.size() % 2 != 0)
        return std::nullopt;
    std::vector<uint8_t> out;
    out.reserve(s.size() / 2);
    for (size_t i = 0; i < s.size(); i += 2) {
        int hi = nibble(s[i]), lo = nibble(s[i + 1]);
        if (hi < 0 || lo < 0)
            return std::nullopt;
        out.push_back(uint8_t(hi << 4 | lo));
    }
    return out;
}

// splitmix64: deterministic 64-bit mixer used wherever the artifact needs a
// platform-independent hash or counter-seeded pseudo-random stream.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace strobe
