#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "strobe/ipv4.hpp"

namespace strobe::routefilter {

struct Prefix {
    uint32_t addr = 0; // canonical: host bits zero
    uint8_t len = 0;

    bool operator==(const Prefix&) const = default;
    bool operator<(const Prefix& o) const {
        return addr != o.addr ? addr < o.addr : len < o.len;
    }

    std::string to_string() const {
        return IPv4Addr(addr).to_string() + "/" + std::to_string(len);
    }
};

// Strict CIDR parse: requires a/b form, length 0..32, host bits clear.
inline std::optional<Prefix> parse_prefix(std::string_view text) {
    const auto slash = text.find('/');
    if (slash == std::string_view::npos || text.find('/', slash + 1) != std::string_view::npos)
        return std::nullopt;
    const auto addr = IPv4Addr::parse(text.substr(0, slash));
    if (!addr)
        return std::nullopt;
    const auto len_text = text.substr(slash + 1);
    if (len_text.empty() || len_text.size() > 2)
        return std::nullopt;
    unsigned len = 0;
    for (char ch : len_text) {
        if (ch < '0' || ch > '9')
            return std::nullopt;
        len = len * 10 + unsigned(ch - '0');
    }
    if (len > 32)
        return std::nullopt;
    const uint32_t mask = len == 0 ? 0 : ~uint32_t(0) << (32 - len);
    if ((addr->value() & ~mask) != 0)
        return std::nullopt; // host bits set
    return Prefix{addr->value(), uint8_t(len)};
}

struct PrefixTable {
    std::vector<Prefix> entries;

    void canonicalize() {
        std::sort(entries.begin(), entries.end());
        entries.erase(std::unique(entries.begin(), entries.end()), entries.end());
    }
};

// One prefix per line; '#' comments and blank lines ignored.  Malformed
// lines abort with the 1-based line number.
inline PrefixTable load_prefixes(std::istream& in) {
    PrefixTable table;
    std::string line;
    for (size_t lineno = 1; std::getline(in, line); ++lineno) {
        std::string_view s(line);
        if (const auto hash = s.find('#'); hash != std::string_view::npos)
            s = s.substr(0, hash);
        while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
            s.remove_prefix(1);
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
            s.remove_suffix(1);
        if (s.empty())
            continue;
        const auto p = parse_prefix(s);
        if (!p)
            throw std::runtime_error("prefix file line " + std::to_string(lineno) +
                                     ": malformed prefix '" + std::string(s) + "'");
        table.entries.push_back(*p);
    }
    table.canonicalize();
    return table;
}

// Path-compressed binary radix trie for longest-prefix match.  Immutable
// after construction; memory is fixed by the table, not by lookup volume.
class RoutingTrie {
  public:
    RoutingTrie() { nodes_.push_back({}); }

    explicit RoutingTrie(const PrefixTable& table) : RoutingTrie() {
        for (const auto& p : table.entries)
            insert(p);
    }

    std::optional<Prefix> longest_match(IPv4Addr a) const {
        const uint32_t key = a.value();
        std::optional<Prefix> best;
        uint32_t n = 0, depth = 0;
        if (nodes_[0].pfx_len >= 0)
            best = Prefix{0, 0};
        while (depth < 32) {
            const int32_t c = nodes_[n].child[bit(key, depth)];
            if (c < 0)
                break;
            const Node& nd = nodes_[size_t(c)];
            if (left_bits(key, depth, nd.label_len) != nd.label)
                break;
            depth += nd.label_len;
            n = uint32_t(c);
            if (nd.pfx_len >= 0)
                best = Prefix{key & len_mask(uint8_t(nd.pfx_len)), uint8_t(nd.pfx_len)};
        }
        return best;
    }

    bool is_routed(IPv4Addr a) const { return longest_match(a).has_value(); }

  private:
    struct Node {
        uint32_t label = 0; // edge bits into this node, left-aligned
        uint8_t label_len = 0;
        int16_t pfx_len = -1; // >= 0: a table prefix of that length ends here
        int32_t child[2] = {-1, -1};
    };

    static uint32_t bit(uint32_t key, uint32_t pos) { return (key >> (31 - pos)) & 1; }
    static uint32_t len_mask(uint8_t len) { return len == 0 ? 0 : ~uint32_t(0) << (32 - len); }
    static uint32_t left_bits(uint32_t key, uint32_t pos, uint8_t n) {
        return n == 0 ? 0 : (key << pos) & len_mask(n);
    }

    void insert(const Prefix& p) {
        if (p.len == 0) {
            nodes_[0].pfx_len = 0;
            return;
        }
        uint32_t n = 0, depth = 0;
        for (;;) {
            const uint32_t b = bit(p.addr, depth);
            int32_t c = nodes_[n].child[b];
            if (c < 0) {
                Node leaf;
                leaf.label = left_bits(p.addr, depth, uint8_t(p.len - depth));
                leaf.label_len = uint8_t(p.len - depth);
                leaf.pfx_len = int16_t(p.len);
                nodes_.push_back(leaf);
                nodes_[n].child[b] = int32_t(nodes_.size() - 1);
                return;
            }
            const uint8_t elen = nodes_[size_t(c)].label_len;
            const uint8_t rem = uint8_t(p.len - depth);
            const uint8_t w = std::min(elen, rem);
            const uint32_t diff = left_bits(p.addr, depth, w) ^ (nodes_[size_t(c)].label & len_mask(w));
            const uint8_t j = diff == 0 ? w : uint8_t(std::countl_zero(diff));
            if (j == elen) { // whole edge matched, descend
                depth += elen;
                n = uint32_t(c);
                if (depth == p.len) {
                    nodes_[n].pfx_len = int16_t(p.len);
                    return;
                }
                continue;
            }
            // Split c's edge at j: mid takes the shared top bits, c keeps the rest.
            Node mid;
            mid.label = nodes_[size_t(c)].label & len_mask(j);
            mid.label_len = j;
            const uint32_t tail = nodes_[size_t(c)].label << j;
            const uint32_t tail_bit = tail >> 31;
            nodes_[size_t(c)].label = tail;
            nodes_[size_t(c)].label_len = uint8_t(elen - j);
            nodes_.push_back(mid);
            const int32_t m = int32_t(nodes_.size() - 1);
            nodes_[size_t(m)].child[tail_bit] = c;
            nodes_[n].child[b] = m;
            if (j == rem) {
                nodes_[size_t(m)].pfx_len = int16_t(p.len);
            } else {
                Node leaf;
                leaf.label = left_bits(p.addr, depth + j, uint8_t(rem - j));
                leaf.label_len = uint8_t(rem - j);
                leaf.pfx_len = int16_t(p.len);
                nodes_.push_back(leaf);
                nodes_[size_t(m)].child[bit(p.addr, depth + j)] = int32_t(nodes_.size() - 1);
            }
            return;
        }
    }

    std::vector<Node> nodes_;
};

} // namespace strobe::routefilter
