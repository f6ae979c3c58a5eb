#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "strobe/ipv4.hpp"

namespace strobe {

// One captured reply frame: a full IPv4 packet plus its arrival time in
// elapsed units since run start.
struct RawReply {
    std::vector<uint8_t> packet;
    uint64_t recv_elapsed = 0;
    IPv4Addr outer_src;
};

// Transport contract used by the engine: one logical sender, one logical
// receiver.  poll returns replies that have arrived by now_units;
// wait_remaining drains what is still in flight after the last send.
class Transport {
  public:
    virtual ~Transport() = default;
    virtual void send(std::span<const uint8_t> packet, IPv4Addr dst) = 0;
    virtual std::optional<RawReply> poll(uint64_t now_units) = 0;
    virtual std::optional<RawReply> wait_remaining() = 0;
};

} // namespace strobe
