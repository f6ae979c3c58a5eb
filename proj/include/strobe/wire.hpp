#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <variant>

#include "strobe/bytes.hpp"
#include "strobe/checksum.hpp"
#include "strobe/ipv4.hpp"

namespace strobe::wire {

enum class ProbeMode : uint8_t { tcp_ack, tcp_syn };

// The logical probe.  elapsed is time units since run start (ms by default,
// us behind a flag); it must stay below 2^32 units for the stamp to fit.
struct ProbeDescriptor {
    IPv4Addr target;
    uint8_t ttl = 0;
    uint32_t elapsed = 0;
    ProbeMode mode = ProbeMode::tcp_ack;
    uint8_t dscp = 0; // 6-bit
};

// Header fields the probe state is packed into.  Everything a reply decoder
// needs lives here; no per-probe state is retained after send.
struct EncodedProbe {
    uint8_t ip_ttl = 0;
    uint16_t ip_id = 0;
    IPv4Addr ip_dst;
    uint16_t tcp_sport = 0;
    uint16_t tcp_dport = 80;
    uint32_t tcp_seq = 0;
    uint32_t tcp_ack = 0;
    ProbeMode mode = ProbeMode::tcp_ack;
    uint8_t dscp = 0;

    uint8_t tcp_flags() const { return mode == ProbeMode::tcp_syn ? 0x02 : 0x10; }
};

// ip_id carries the TTL in its low octet (high octet reserved, zero);
// tcp_seq carries the elapsed stamp; sport is the address checksum so a
// quote can prove the destination survived the trip unmodified.  The
// load-balancer tuple (dst, proto, sport, dport) is fixed across TTLs.
inline EncodedProbe encode_probe(const ProbeDescriptor& d) {
    if (d.ttl == 0)
        throw std::invalid_argument("encode_probe: ttl 0 is not sendable");
    EncodedProbe e;
    e.ip_ttl = d.ttl;
    e.ip_id = d.ttl; // low octet = ttl, high octet 0
    e.ip_dst = d.target;
    e.tcp_sport = addr_checksum(d.target);
    e.tcp_dport = 80;
    e.tcp_seq = d.elapsed;
    e.tcp_ack = d.mode == ProbeMode::tcp_ack ? d.target.value() : 0;
    e.mode = d.mode;
    e.dscp = d.dscp;
    return e;
}

inline constexpr size_t kProbePacketSize = 40; // 20 IP + 20 TCP, no options

// Serializes to a standards-conformant IPv4+TCP packet, checksums included.
inline std::array<uint8_t, kProbePacketSize> build_packet(const EncodedProbe& e, IPv4Addr src) {
    std::array<uint8_t, kProbePacketSize> p{};
    p[0] = 0x45;
    p[1] = uint8_t(e.dscp << 2);
    put_be16({p.data() + 2, 2}, kProbePacketSize);
    put_be16({p.data() + 4, 2}, e.ip_id);
    p[8] = e.ip_ttl;
    p[9] = 6;
    put_be32({p.data() + 12, 4}, src.value());
    put_be32({p.data() + 16, 4}, e.ip_dst.value());
    put_be16({p.data() + 10, 2}, cksum({p.data(), 20}));

    uint8_t* t = p.data() + 20;
    put_be16({t, 2}, e.tcp_sport);
    put_be16({t + 2, 2}, e.tcp_dport);
    put_be32({t + 4, 4}, e.tcp_seq);
    put_be32({t + 8, 4}, e.tcp_ack);
    t[12] = 0x50;
    t[13] = e.tcp_flags();
    put_be16({t + 14, 2}, 0xFFFE);
    put_be16({t + 16, 2}, tcp_cksum(src, e.ip_dst, {t, 20}));
    return p;
}

inline std::array<uint8_t, kProbePacketSize> build_packet(const ProbeDescriptor& d, IPv4Addr src) {
    return build_packet(encode_probe(d), src);
}

enum class ResponseType : uint8_t { ttl_exceeded, dest_unreachable, echo_of_target, tcp_reply };

// One decoded reply; the unit of the output file.  recv_time is in elapsed
// units since run start (the file header carries the absolute run start).
struct ResponseRecord {
    IPv4Addr target;
    uint8_t sent_ttl = 0; // 0 for tcp_reply: originating TTL is unrecoverable
    IPv4Addr hop_addr;
    std::optional<uint32_t> rtt;
    uint64_t recv_time = 0;
    ResponseType response_type = ResponseType::ttl_exceeded;
    uint8_t reply_ttl = 0;
    uint16_t quoted_ipid = 0;
    uint16_t quoted_size = 0;
    uint16_t reply_size = 0;
    uint8_t dscp = 0;
    bool checksum_valid = false;
};

// Why a reply was not decoded: undecodable quotes are counted in the run
// summary; foreign packets (not ours) are silently dropped.
enum class DecodeDrop : uint8_t { undecodable, foreign };

using DecodeOutcome = std::variant<ResponseRecord, DecodeDrop>;

struct ReplyMeta {
    uint16_t reply_size = 0;
    uint8_t reply_ttl = 0;
    uint8_t dscp = 0;
};

// Recovers the probe state from an ICMP quotation: quoted inner IPv4 header
// plus the first 8 transport octets.  Inner headers with options are
// tolerated by offsetting.  recv_time and run_start share the probe's time
// units; rtt = (recv_time - run_start) - quoted elapsed stamp.
inline DecodeOutcome decode_quote(std::span<const uint8_t> icmp_payload, uint64_t recv_time,
                                  uint64_t run_start, IPv4Addr outer_src,
                                  std::pair<uint8_t, uint8_t> icmp_type_code,
                                  const ReplyMeta& meta) {
    if (icmp_payload.size() < 20)
        return DecodeDrop::undecodable;
    if ((icmp_payload[0] >> 4) != 4)
        return DecodeDrop::undecodable;
    const size_t ihl = size_t(icmp_payload[0] & 0x0F) * 4;
    if (ihl < 20 || icmp_payload.size() < ihl + 8)
        return DecodeDrop::undecodable;
    if (icmp_payload[9] != 6)
        return DecodeDrop::foreign;

    ResponseType type;
    switch (icmp_type_code.first) {
    case 11: type = ResponseType::ttl_exceeded; break;
    case 3: type = ResponseType::dest_unreachable; break;
    default: return DecodeDrop::foreign;
    }

    const auto quoted_dport = get_be16(icmp_payload.subspan(ihl + 2, 2));
    if (quoted_dport != 80)
        return DecodeDrop::foreign;

    ResponseRecord r;
    r.target = IPv4Addr(get_be32(icmp_payload.subspan(16, 4)));
    r.quoted_ipid = get_be16(icmp_payload.subspan(4, 2));
    r.sent_ttl = uint8_t(r.quoted_ipid & 0xFF);
    r.hop_addr = outer_src;
    r.response_type = outer_src == r.target ? ResponseType::echo_of_target : type;
    const uint32_t elapsed = get_be32(icmp_payload.subspan(ihl + 4, 4));
    const uint64_t recv_elapsed = recv_time - run_start;
    if (recv_elapsed >= elapsed)
        r.rtt = uint32_t(recv_elapsed - elapsed);
    r.recv_time = recv_elapsed;
    const auto quoted_sport = get_be16(icmp_payload.subspan(ihl, 2));
    r.checksum_valid = addr_checksum(r.target) == quoted_sport;
    r.quoted_size = uint16_t(icmp_payload.size());
    r.reply_size = meta.reply_size;
    r.reply_ttl = meta.reply_ttl;
    r.dscp = meta.dscp;
    return r;
}

// Classifies a full received IPv4 packet.  ICMP time-exceeded and
// unreachable carry quotes and go through decode_quote; TCP replies are
// direct evidence the destination answered, with no quote to mine.  In SYN
// mode the peer acknowledges seq+1, so the stamp is ack-1; ACK-mode resets
// echo nothing usable, so those records carry no rtt.
inline DecodeOutcome parse_reply(std::span<const uint8_t> packet, uint64_t recv_time,
                                 uint64_t run_start, ProbeMode mode) {
    if (packet.size() < 20 || (packet[0] >> 4) != 4)
        return DecodeDrop::foreign;
    const size_t ihl = size_t(packet[0] & 0x0F) * 4;
    if (ihl < 20 || packet.size() < ihl)
        return DecodeDrop::foreign;
    const IPv4Addr outer_src(get_be32(packet.subspan(12, 4)));
    ReplyMeta meta;
    meta.reply_size = uint16_t(packet.size());
    meta.reply_ttl = packet[8];
    meta.dscp = uint8_t(packet[1] >> 2);
    const uint8_t proto = packet[9];

    if (proto == 1) {
        if (packet.size() < ihl + 8)
            return DecodeDrop::foreign;
        const uint8_t type = packet[ihl], code = packet[ihl + 1];
        return decode_quote(packet.subspan(ihl + 8), recv_time, run_start, outer_src,
                            {type, code}, meta);
    }
    if (proto == 6) {
        if (packet.size() < ihl + 20)
            return DecodeDrop::foreign;
        const auto tcp = packet.subspan(ihl);
        if (get_be16(tcp.subspan(0, 2)) != 80)
            return DecodeDrop::foreign;
        ResponseRecord r;
        r.target = outer_src;
        r.hop_addr = outer_src;
        r.sent_ttl = 0;
        r.response_type = ResponseType::tcp_reply;
        r.recv_time = recv_time - run_start;
        if (mode == ProbeMode::tcp_syn) {
            const uint32_t ack = get_be32(tcp.subspan(8, 4));
            const uint32_t elapsed = ack - 1;
            const uint64_t recv_elapsed = recv_time - run_start;
            if (ack != 0 && recv_elapsed >= elapsed)
                r.rtt = uint32_t(recv_elapsed - elapsed);
        }
        r.checksum_valid = addr_checksum(outer_src) == get_be16(tcp.subspan(2, 2));
        r.reply_size = meta.reply_size;
        r.reply_ttl = meta.reply_ttl;
        r.dscp = meta.dscp;
        return r;
    }
    return DecodeDrop::foreign;
}

} // namespace strobe::wire
