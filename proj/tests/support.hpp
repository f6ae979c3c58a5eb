#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "strobe/checksum.hpp"
#include "strobe/ipv4.hpp"
#include "strobe/wire.hpp"

namespace testsupport {

using strobe::IPv4Addr;

// ICMP error packet from `hop` to `self` quoting `quote` octets of the
// expired probe, shaped like what a conformant router emits.
inline std::vector<uint8_t> icmp_packet(uint8_t type, uint8_t code, IPv4Addr hop, IPv4Addr self,
                                        std::span<const uint8_t> quote, uint8_t reply_ttl = 64,
                                        uint8_t dscp = 0) {
    std::vector<uint8_t> p(20 + 8 + quote.size());
    p[0] = 0x45;
    p[1] = uint8_t(dscp << 2);
    strobe::put_be16(p, 2, uint16_t(p.size()));
    p[8] = reply_ttl;
    p[9] = 1;
    strobe::put_be32(p, 12, hop.value());
    strobe::put_be32(p, 16, self.value());
    strobe::put_be16(p, 10, strobe::wire::cksum({p.data(), 20}));
    p[20] = type;
    p[21] = code;
    std::copy(quote.begin(), quote.end(), p.begin() + 28);
    strobe::put_be16(p, 22, strobe::wire::cksum({p.data() + 20, p.size() - 20}));
    return p;
}

// Plain TCP segment from `src` as a destination would answer a probe.
inline std::vector<uint8_t> tcp_packet(IPv4Addr src, IPv4Addr dst, uint16_t sport, uint16_t dport,
                                       uint32_t seq, uint32_t ack, uint8_t flags,
                                       uint8_t reply_ttl = 64) {
    std::vector<uint8_t> p(40);
    p[0] = 0x45;
    strobe::put_be16(p, 2, 40);
    p[8] = reply_ttl;
    p[9] = 6;
    strobe::put_be32(p, 12, src.value());
    strobe::put_be32(p, 16, dst.value());
    strobe::put_be16(p, 10, strobe::wire::cksum({p.data(), 20}));
    uint8_t* t = p.data() + 20;
    strobe::put_be16({t, 20}, 0, sport);
    strobe::put_be16({t, 20}, 2, dport);
    strobe::put_be32({t, 20}, 4, seq);
    strobe::put_be32({t, 20}, 8, ack);
    t[12] = 0x50;
    t[13] = flags;
    strobe::put_be16({t, 20}, 16, strobe::wire::tcp_cksum(src, dst, {t, 20}));
    return p;
}

// Unique temp path per call; files land under the system temp dir.
inline std::string temp_path(const std::string& tag) {
    static std::mt19937_64 rng{std::random_device{}()};
    const auto dir = std::filesystem::temp_directory_path();
    return (dir / (tag + "." + std::to_string(rng()) + ".tmp")).string();
}

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

} // namespace testsupport
