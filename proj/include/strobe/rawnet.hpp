#pragma once

#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include "strobe/bytes.hpp"
#include "strobe/ipv4.hpp"
#include "strobe/transport.hpp"

namespace strobe::rawnet {

// Userspace capture filter, kept pure so it is testable without sockets:
// keep ICMP time-exceeded/unreachable and TCP-from-port-80 packets that are
// addressed to us.
inline bool reply_filter(std::span<const uint8_t> packet, IPv4Addr self) {
    if (packet.size() < 20 || (packet[0] >> 4) != 4)
        return false;
    const size_t ihl = size_t(packet[0] & 0x0F) * 4;
    if (ihl < 20 || packet.size() < ihl + 8)
        return false;
    if (get_be32(packet.subspan(16, 4)) != self.value())
        return false;
    const uint8_t proto = packet[9];
    if (proto == 1) {
        const uint8_t type = packet[ihl];
        return type == 11 || type == 3;
    }
    if (proto == 6)
        return get_be16(packet.subspan(ihl, 2)) == 80;
    return false;
}

// Local address the kernel would route externally-bound packets from.
inline std::optional<IPv4Addr> detect_source() {
    const int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd < 0)
        return std::nullopt;
    sockaddr_in sin{};
    sin.sin_family = AF_INET;
    sin.sin_port = htons(53);
    sin.sin_addr.s_addr = htonl(0xC0000201); // 192.0.2.1, never actually sent to
    std::optional<IPv4Addr> out;
    if (::connect(fd, reinterpret_cast<sockaddr*>(&sin), sizeof sin) == 0) {
        sockaddr_in local{};
        socklen_t len = sizeof local;
        if (::getsockname(fd, reinterpret_cast<sockaddr*>(&local), &len) == 0)
            out = IPv4Addr(ntohl(local.sin_addr.s_addr));
    }
    ::close(fd);
    return out;
}

// Real-network backend: header-included raw send socket plus raw ICMP and
// TCP receive sockets.  Requires privileges and refuses to start without
// them; never silently degrades to simulation.
class RawTransport final : public Transport {
  public:
    struct Config {
        std::optional<IPv4Addr> source;
        uint32_t linger_ms = 1000; // receive window after the last send
    };

    explicit RawTransport(Config cfg, uint32_t units_per_sec = 1000)
        : ups_(units_per_sec), linger_ms_(cfg.linger_ms) {
        send_fd_ = ::socket(AF_INET, SOCK_RAW, IPPROTO_RAW);
        icmp_fd_ = ::socket(AF_INET, SOCK_RAW, IPPROTO_ICMP);
        tcp_fd_ = ::socket(AF_INET, SOCK_RAW, IPPROTO_TCP);
        if (send_fd_ < 0 || icmp_fd_ < 0 || tcp_fd_ < 0) {
            const int err = errno;
            close_all();
            if (err == EPERM || err == EACCES)
                throw std::runtime_error(
                    "raw transport: raw sockets need root or CAP_NET_RAW; refusing to start");
            throw std::runtime_error(std::string("raw transport: socket: ") +
                                     std::strerror(err));
        }
        const int one = 1;
        if (::setsockopt(send_fd_, IPPROTO_IP, IP_HDRINCL, &one, sizeof one) != 0) {
            const int err = errno;
            close_all();
            throw std::runtime_error(std::string("raw transport: IP_HDRINCL: ") +
                                     std::strerror(err));
        }
        if (cfg.source) {
            source_ = *cfg.source;
        } else {
            const auto detected = detect_source();
            if (!detected)
                throw std::runtime_error("raw transport: cannot detect a source address; "
                                         "pass one explicitly");
            source_ = *detected;
        }
        epoch_ = std::chrono::steady_clock::now();
        last_send_ = epoch_;
    }

    RawTransport(const RawTransport&) = delete;
    RawTransport& operator=(const RawTransport&) = delete;
    ~RawTransport() override { close_all(); }

    IPv4Addr source() const { return source_; }
    uint64_t send_errors() const { return send_errors_; }

    void send(std::span<const uint8_t> packet, IPv4Addr dst) override {
        if (!sent_any_) {
            // Re-anchor the clock at the first probe so reply timestamps
            // share the run's elapsed origin.
            epoch_ = std::chrono::steady_clock::now();
            sent_any_ = true;
        }
        sockaddr_in sin{};
        sin.sin_family = AF_INET;
        sin.sin_addr.s_addr = htonl(dst.value());
        const auto n = ::sendto(send_fd_, packet.data(), packet.size(), 0,
                                reinterpret_cast<const sockaddr*>(&sin), sizeof sin);
        last_send_ = std::chrono::steady_clock::now();
        if (n >= 0)
            return;
        if (errno == ENETUNREACH || errno == EHOSTUNREACH || errno == EACCES ||
            errno == EHOSTDOWN) {
            ++send_errors_; // unreachable destinations are expected; keep probing
            return;
        }
        throw std::runtime_error(std::string("raw transport: sendto: ") +
                                 std::strerror(errno));
    }

    std::optional<RawReply> poll(uint64_t) override { return try_recv(); }

    std::optional<RawReply> wait_remaining() override {
        const auto deadline = last_send_ + std::chrono::milliseconds(linger_ms_);
        for (;;) {
            if (auto r = try_recv())
                return r;
            const auto now = std::chrono::steady_clock::now();
            if (now >= deadline)
                return std::nullopt;
            pollfd fds[2] = {{icmp_fd_, POLLIN, 0}, {tcp_fd_, POLLIN, 0}};
            const auto left =
                std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
            ::poll(fds, 2, int(std::min<long long>(left, 50)));
        }
    }

  private:
    void close_all() {
        for (int* fd : {&send_fd_, &icmp_fd_, &tcp_fd_})
            if (*fd >= 0) {
                ::close(*fd);
                *fd = -1;
            }
    }

    std::optional<RawReply> try_recv() {
        for (int fd : {icmp_fd_, tcp_fd_}) {
            uint8_t buf[4096];
            for (;;) {
                const auto n = ::recv(fd, buf, sizeof buf, MSG_DONTWAIT);
                if (n < 0) {
                    if (errno == EINTR)
                        continue;
                    break; // EAGAIN or a transient error: try the other socket
                }
                const std::span<const uint8_t> pkt(buf, size_t(n));
                if (!reply_filter(pkt, source_))
                    continue;
                RawReply r;
                r.packet.assign(pkt.begin(), pkt.end());
                const std::chrono::duration<double> d =
                    std::chrono::steady_clock::now() - epoch_;
                r.recv_elapsed = uint64_t(d.count() * ups_);
                r.outer_src = IPv4Addr(get_be32(pkt.subspan(12, 4)));
                return r;
            }
        }
        return std::nullopt;
    }

    int send_fd_ = -1, icmp_fd_ = -1, tcp_fd_ = -1;
    IPv4Addr source_;
    uint32_t ups_;
    uint32_t linger_ms_;
    bool sent_any_ = false;
    uint64_t send_errors_ = 0;
    std::chrono::steady_clock::time_point epoch_;
    std::chrono::steady_clock::time_point last_send_;
};

} // namespace strobe::rawnet
