#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "strobe/ipv4.hpp"

namespace strobe::wire {

// Internet ones'-complement sum folded to 16 bits.  Odd trailing octet is
// padded as the high byte of a final word.
inline uint16_t cksum(std::span<const uint8_t> data) {
    uint32_t sum = 0;
    size_t i = 0;
    for (; i + 1 < data.size(); i += 2)
        sum += uint32_t(data[i]) << 8 | data[i + 1];
    if (i < data.size())
        sum += uint32_t(data[i]) << 8;
    while (sum >> 16)
        sum = (sum & 0xFFFF) + (sum >> 16);
    return uint16_t(~sum & 0xFFFF);
}

// Checksum of the four address octets alone.  Stamped into the source port
// of every probe so a reply's quoted header can be validated against the
// destination it claims to quote.
inline uint16_t addr_checksum(IPv4Addr a) {
    const uint8_t o[4] = {a.octet(0), a.octet(1), a.octet(2), a.octet(3)};
    return cksum(o);
}

// TCP checksum with the IPv4 pseudo header (src, dst, zero, proto, length).
inline uint16_t tcp_cksum(IPv4Addr src, IPv4Addr dst, std::span<const uint8_t> segment) {
    uint32_t sum = 0;
    sum += src.value() >> 16;
    sum += src.value() & 0xFFFF;
    sum += dst.value() >> 16;
    sum += dst.value() & 0xFFFF;
    sum += 6; // TCP
    sum += uint32_t(segment.size());
    size_t i = 0;
    for (; i + 1 < segment.size(); i += 2)
        sum += uint32_t(segment[i]) << 8 | segment[i + 1];
    if (i < segment.size())
        sum += uint32_t(segment[i]) << 8;
    while (sum >> 16)
        sum = (sum & 0xFFFF) + (sum >> 16);
    return uint16_t(~sum & 0xFFFF);
}

} // namespace strobe::wire
