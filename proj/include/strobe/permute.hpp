#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "strobe/ipv4.hpp"
#include "strobe/rc5.hpp"

namespace strobe::permute {

// The probing domain D: an index space whose elements decode to
// (target, ttl) assignments.  slash24 and full_v4 kinds span the whole
// 32-bit block space; target_list spans |targets| x |ttl range|.

enum class DomainKind { full_v4_ttl, slash24_mode, target_list };

struct ProbeAssignment {
    IPv4Addr target;
    uint8_t ttl = 0;
};

struct ProbeDomain {
    DomainKind kind = DomainKind::target_list;
    std::vector<IPv4Addr> targets; // target_list only
    uint8_t ttl_min = 1;
    uint8_t ttl_max = 32;

    static ProbeDomain from_targets(std::vector<IPv4Addr> targets, uint8_t ttl_min = 1,
                                    uint8_t ttl_max = 32) {
        ProbeDomain d;
        d.kind = DomainKind::target_list;
        d.targets = std::move(targets);
        d.ttl_min = ttl_min;
        d.ttl_max = ttl_max;
        d.validate();
        return d;
    }
    static ProbeDomain slash24(uint8_t ttl_min = 1, uint8_t ttl_max = 32) {
        ProbeDomain d;
        d.kind = DomainKind::slash24_mode;
        d.ttl_min = ttl_min;
        d.ttl_max = ttl_max;
        d.validate();
        return d;
    }
    static ProbeDomain full_v4(uint8_t ttl_min = 1, uint8_t ttl_max = 32) {
        ProbeDomain d;
        d.kind = DomainKind::full_v4_ttl;
        d.ttl_min = ttl_min;
        d.ttl_max = ttl_max;
        d.validate();
        return d;
    }

    void validate() const {
        if (ttl_min < 1 || ttl_min > ttl_max)
            throw std::invalid_argument("domain: need 1 <= ttl_min <= ttl_max <= 255");
        if (kind == DomainKind::target_list && targets.empty())
            throw std::invalid_argument("domain: target list is empty");
    }

    uint32_t ttl_count() const { return uint32_t(ttl_max) - ttl_min + 1; }

    uint64_t size() const {
        if (kind == DomainKind::target_list)
            return uint64_t(targets.size()) * ttl_count();
        return uint64_t(1) << 32;
    }
};

// Decodes a 32-bit ciphertext in slash24 mode: the top 24 bits pick the
// /24, the low octet is the TTL, and the destination's last octet is
// (b0+b1+b2) mod 256 -- a pure function of the /24, so every TTL probe
// toward a given /24 hits the same address.
inline ProbeAssignment decode_slash24(uint32_t c) {
    const uint8_t b0 = uint8_t(c >> 24), b1 = uint8_t(c >> 16), b2 = uint8_t(c >> 8);
    return {IPv4Addr(b0, b1, b2, uint8_t(b0 + b1 + b2)), uint8_t(c)};
}

// full_v4 mode: the ciphertext itself is the destination; the TTL octet
// stays in the same position as slash24 mode.  Each address is visited
// exactly once per pass, at one pseudo-random TTL.
inline ProbeAssignment decode_full_v4(uint32_t c) {
    return {IPv4Addr(c), uint8_t(c)};
}

// A keyed bijection over [0, |D|).  Domains up to the table threshold use a
// prefix cipher (rank every element by its ciphertext once, then index);
// larger domains use cycle-walking, which needs no table.
class PermutedDomain {
  public:
    enum class Strategy { prefix_cipher, cycle_walking };

    static constexpr uint64_t kDefaultTableThreshold = uint64_t(1) << 20;
    static constexpr uint32_t kWalkCap = uint32_t(1) << 16;

    PermutedDomain(ProbeDomain domain, CipherKey key,
                   uint64_t table_threshold = kDefaultTableThreshold)
        : domain_(std::move(domain)), cipher_(key) {
        domain_.validate();
        size_ = domain_.size();
        strategy_ = size_ <= table_threshold ? Strategy::prefix_cipher : Strategy::cycle_walking;
        if (strategy_ == Strategy::prefix_cipher)
            build_table();
    }

    const ProbeDomain& domain() const { return domain_; }
    uint64_t size() const { return size_; }
    Strategy strategy() const { return strategy_; }

    // i-th element of the keyed permutation of [0, |D|).
    uint32_t permute_index(uint64_t i) const {
        if (i >= size_)
            throw std::out_of_range("permute_index: index outside domain");
        if (strategy_ == Strategy::prefix_cipher)
            return table_[i];
        return walk(uint32_t(i));
    }

    // Position of domain element v in the permutation; inverse of
    // permute_index.
    uint64_t rank_of(uint32_t v) const {
        if (v >= size_)
            throw std::out_of_range("rank_of: value outside domain");
        if (strategy_ == Strategy::prefix_cipher)
            return inverse_[v];
        return walk_back(v);
    }

    ProbeAssignment decode(uint32_t v) const {
        switch (domain_.kind) {
        case DomainKind::slash24_mode:
            return decode_slash24(v);
        case DomainKind::full_v4_ttl:
            return decode_full_v4(v);
        case DomainKind::target_list:
            return decode_target_list(v);
        }
        throw std::logic_error("decode: bad domain kind");
    }

    ProbeAssignment decode_target_list(uint32_t v) const {
        if (domain_.kind != DomainKind::target_list)
            throw std::logic_error("decode_target_list: wrong domain kind");
        if (v >= size_)
            throw std::out_of_range("decode_target_list: value outside domain");
        const uint32_t ttls = domain_.ttl_count();
        return {domain_.targets[v / ttls], uint8_t(domain_.ttl_min + v % ttls)};
    }

    // Half-open index interval probed by shard v of n; the n intervals
    // partition [0, |D|) exactly.
    std::pair<uint64_t, uint64_t> shard_range(uint32_t v, uint32_t n) const {
        if (n == 0 || v >= n)
            throw std::out_of_range("shard_range: need 0 <= v < n");
        const unsigned __int128 sz = size_;
        return {uint64_t(sz * v / n), uint64_t(sz * (v + 1) / n)};
    }

  private:
    void build_table() {
        table_.resize(size_);
        std::iota(table_.begin(), table_.end(), 0u);
        std::vector<uint32_t> ct(size_);
        for (uint64_t i = 0; i < size_; ++i)
            ct[i] = cipher_.encrypt(uint32_t(i));
        std::sort(table_.begin(), table_.end(),
                  [&](uint32_t a, uint32_t b) { return ct[a] < ct[b]; });
        inverse_.resize(size_);
        for (uint64_t i = 0; i < size_; ++i)
            inverse_[table_[i]] = uint32_t(i);
    }

    uint32_t walk(uint32_t x) const {
        uint32_t v = cipher_.encrypt(x);
        for (uint32_t iter = 0; v >= size_; ++iter) {
            if (iter >= kWalkCap)
                throw std::runtime_error("cycle walk exceeded iteration cap");
            v = cipher_.encrypt(v);
        }
        return v;
    }

    uint32_t walk_back(uint32_t v) const {
        uint32_t x = cipher_.decrypt(v);
        for (uint32_t iter = 0; x >= size_; ++iter) {
            if (iter >= kWalkCap)
                throw std::runtime_error("cycle walk exceeded iteration cap");
            x = cipher_.decrypt(x);
        }
        return x;
    }

    ProbeDomain domain_;
    Rc5 cipher_;
    uint64_t size_ = 0;
    Strategy strategy_ = Strategy::prefix_cipher;
    std::vector<uint32_t> table_;   // prefix cipher: rank -> element
    std::vector<uint32_t> inverse_; // prefix cipher: element -> rank
};

} // namespace strobe::permute
