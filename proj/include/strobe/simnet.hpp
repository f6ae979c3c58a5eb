#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "strobe/bytes.hpp"
#include "strobe/checksum.hpp"
#include "strobe/formats.hpp"
#include "strobe/ipv4.hpp"
#include "strobe/transport.hpp"

namespace strobe::simnet {

// Default probe source used by simulated runs; balancer branch choices
// depend on the flow tuple, so the same source must be used when computing
// ground truth.
inline constexpr IPv4Addr kDefaultSource(10, 255, 255, 254);

struct RouterPolicy {
    bool responds = true;
    double rate_limit = 0.0; // expiry replies per second; 0 = unlimited
    double loss_prob = 0.0;
};

struct Router {
    std::string id;
    IPv4Addr iface;
    bool balancer = false;
    RouterPolicy policy;
    std::vector<uint32_t> next; // out-links, sorted by iface after finalize
};

enum class DestReply : uint8_t { tcp, unreach };

struct Destination {
    IPv4Addr addr;
    uint32_t attach = 0;
    DestReply reply = DestReply::tcp;
};

inline uint64_t flow_hash(uint32_t src, uint32_t dst, uint16_t sport, uint16_t dport,
                          uint8_t proto, uint64_t seed) {
    uint64_t h = splitmix64(seed ^ 0x9E3779B97F4A7C15ull);
    h = splitmix64(h ^ src);
    h = splitmix64(h ^ dst);
    h = splitmix64(h ^ (uint64_t(sport) << 16 | dport));
    h = splitmix64(h ^ proto);
    return h;
}

// Ground-truth network: routers forming a DAG (tree plus balancer
// diamonds), destinations attached to routers.  Structure is immutable
// after finalize(); all per-run state lives in SimTransport.
class SimTopology {
  public:
    uint64_t seed = 1;
    uint32_t hop_delay_ms = 1; // one-way per-hop latency
    uint32_t jitter_ms = 0;    // seeded uniform extra delay, 0 = exact
    uint16_t quote_bytes = 28;

    uint32_t add_router(std::string id, IPv4Addr iface, bool balancer = false,
                        RouterPolicy policy = {}) {
        if (by_id_.count(id))
            throw std::invalid_argument("topology: duplicate router id " + id);
        by_id_[id] = uint32_t(routers_.size());
        routers_.push_back(Router{std::move(id), iface, balancer, policy, {}});
        return uint32_t(routers_.size() - 1);
    }

    void add_link(std::string_view from, std::string_view to) {
        routers_[index_of(from)].next.push_back(index_of(to));
    }

    void add_dest(IPv4Addr addr, std::string_view router, DestReply reply = DestReply::tcp) {
        if (dest_index_.count(addr.value()))
            throw std::invalid_argument("topology: duplicate destination " + addr.to_string());
        dest_index_[addr.value()] = uint32_t(dests_.size());
        dests_.push_back(Destination{addr, index_of(router), reply});
    }

    void set_entry(std::string_view router) { entry_ = index_of(router); }

    // Turns branch_point into a balancer by adding a parallel twin router
    // that rejoins at the given children (a one-hop diamond).
    void add_twin_balancer(std::string_view branch_point, std::string twin_id,
                           IPv4Addr twin_iface, const std::vector<std::string>& join_children) {
        routers_[index_of(branch_point)].balancer = true;
        add_router(std::move(twin_id), twin_iface);
        add_link(branch_point, routers_.back().id);
        for (const auto& j : join_children)
            add_link(routers_.back().id, j);
    }

    // Sorts links, rejects cycles, and precomputes for every destination
    // the set of routers from which its attachment is reachable.
    void finalize() {
        if (routers_.empty())
            throw std::invalid_argument("topology: no routers");
        if (entry_ >= routers_.size())
            throw std::invalid_argument("topology: no vantage entry router");
        for (auto& r : routers_)
            std::sort(r.next.begin(), r.next.end(), [&](uint32_t a, uint32_t b) {
                return routers_[a].iface < routers_[b].iface;
            });
        check_acyclic();
        on_path_.assign(dests_.size(), {});
        std::vector<std::vector<uint32_t>> prev(routers_.size());
        for (uint32_t i = 0; i < routers_.size(); ++i)
            for (uint32_t j : routers_[i].next)
                prev[j].push_back(i);
        for (size_t d = 0; d < dests_.size(); ++d) {
            std::vector<uint32_t>& s = on_path_[d];
            std::vector<char> mark(routers_.size(), 0);
            std::vector<uint32_t> stack{dests_[d].attach};
            mark[dests_[d].attach] = 1;
            while (!stack.empty()) {
                const uint32_t v = stack.back();
                stack.pop_back();
                s.push_back(v);
                for (uint32_t p : prev[v])
                    if (!mark[p]) {
                        mark[p] = 1;
                        stack.push_back(p);
                    }
            }
            std::sort(s.begin(), s.end());
            if (!std::binary_search(s.begin(), s.end(), entry_))
                throw std::invalid_argument("topology: destination " +
                                            dests_[d].addr.to_string() +
                                            " unreachable from vantage");
            validate_walk(uint32_t(d));
        }
        finalized_ = true;
    }

    const std::vector<Router>& routers() const { return routers_; }
    const std::vector<Destination>& dests() const { return dests_; }
    uint32_t entry() const { return entry_; }

    const Destination* find_dest(IPv4Addr addr) const {
        const auto it = dest_index_.find(addr.value());
        return it == dest_index_.end() ? nullptr : &dests_[it->second];
    }

    // Router index sequence a flow traverses toward dest, TTL 1 upward.
    std::vector<uint32_t> route(IPv4Addr dst, uint64_t fh) const {
        const auto it = dest_index_.find(dst.value());
        if (it == dest_index_.end())
            return {};
        const auto& s = on_path_[it->second];
        const uint32_t attach = dests_[it->second].attach;
        std::vector<uint32_t> path{entry_};
        uint32_t cur = entry_;
        while (cur != attach) {
            uint32_t choices[16];
            uint32_t k = 0;
            for (uint32_t nxt : routers_[cur].next)
                if (std::binary_search(s.begin(), s.end(), nxt) && k < 16)
                    choices[k++] = nxt;
            if (k == 0)
                throw std::logic_error("topology: routing dead end at " + routers_[cur].id);
            cur = routers_[cur].balancer ? choices[fh % k] : choices[0];
            path.push_back(cur);
        }
        return path;
    }

    // Interface addresses the probe run will observe for dst, given the
    // probe source address (part of the balancer flow tuple).
    std::vector<IPv4Addr> ground_truth(IPv4Addr src, IPv4Addr dst) const {
        const uint64_t fh =
            flow_hash(src.value(), dst.value(), wire::addr_checksum(dst), 80, 6, seed);
        std::vector<IPv4Addr> out;
        for (uint32_t r : route(dst, fh))
            out.push_back(routers_[r].iface);
        return out;
    }

    void to_stream(std::ostream& out) const {
        out << "#topo v=1 seed=" << seed << " hop_delay=" << hop_delay_ms
            << " jitter=" << jitter_ms << " quote=" << quote_bytes << "\n";
        out << "vantage " << routers_[entry_].id << "\n";
        for (const auto& r : routers_) {
            out << (r.balancer ? "balancer " : "router ") << r.id << ' ' << r.iface.to_string();
            if (!r.policy.responds)
                out << " responds=0";
            if (r.policy.rate_limit > 0)
                out << " rate=" << r.policy.rate_limit;
            if (r.policy.loss_prob > 0)
                out << " loss=" << r.policy.loss_prob;
            out << "\n";
        }
        for (const auto& r : routers_)
            for (uint32_t j : r.next)
                out << "link " << r.id << ' ' << routers_[j].id << "\n";
        for (const auto& d : dests_) {
            out << "dest " << d.addr.to_string() << ' ' << routers_[d.attach].id;
            if (d.reply == DestReply::unreach)
                out << " reply=unreach";
            out << "\n";
        }
    }

    static SimTopology from_stream(std::istream& in);

  private:
    uint32_t index_of(std::string_view id) const {
        const auto it = by_id_.find(std::string(id));
        if (it == by_id_.end())
            throw std::invalid_argument("topology: unknown router id " + std::string(id));
        return it->second;
    }

    void check_acyclic() const {
        std::vector<uint8_t> color(routers_.size(), 0);
        // Iterative DFS; state 1 = in stack, 2 = done.
        for (uint32_t start = 0; start < routers_.size(); ++start) {
            if (color[start])
                continue;
            std::vector<std::pair<uint32_t, size_t>> stack{{start, 0}};
            color[start] = 1;
            while (!stack.empty()) {
                auto& [v, i] = stack.back();
                if (i < routers_[v].next.size()) {
                    const uint32_t w = routers_[v].next[i++];
                    if (color[w] == 1)
                        throw std::invalid_argument("topology: forwarding loop at " +
                                                    routers_[w].id);
                    if (color[w] == 0) {
                        color[w] = 1;
                        stack.push_back({w, 0});
                    }
                } else {
                    color[v] = 2;
                    stack.pop_back();
                }
            }
        }
    }

    // Checks every router the dest's flows can visit: non-balancers must
    // have exactly one on-path next hop, balancers between 1 and 16.
    void validate_walk(uint32_t dest_idx) const {
        const auto& s = on_path_[dest_idx];
        const uint32_t attach = dests_[dest_idx].attach;
        std::vector<char> seen(routers_.size(), 0);
        std::vector<uint32_t> stack{entry_};
        seen[entry_] = 1;
        while (!stack.empty()) {
            const uint32_t cur = stack.back();
            stack.pop_back();
            if (cur == attach)
                continue;
            uint32_t k = 0;
            for (uint32_t nxt : routers_[cur].next)
                if (std::binary_search(s.begin(), s.end(), nxt)) {
                    ++k;
                    if (!seen[nxt]) {
                        seen[nxt] = 1;
                        stack.push_back(nxt);
                    }
                }
            if (k == 0 || (k > 1 && !routers_[cur].balancer) || k > 16)
                throw std::invalid_argument("topology: ambiguous route toward " +
                                            dests_[dest_idx].addr.to_string() + " at router " +
                                            routers_[cur].id);
        }
    }

    std::vector<Router> routers_;
    std::vector<Destination> dests_;
    std::unordered_map<std::string, uint32_t> by_id_;
    std::unordered_map<uint32_t, uint32_t> dest_index_;
    std::vector<std::vector<uint32_t>> on_path_; // per dest, sorted router set
    uint32_t entry_ = ~0u;
    bool finalized_ = false;
};

inline SimTopology SimTopology::from_stream(std::istream& in) {
    SimTopology t;
    std::string line;
    size_t lineno = 0;
    std::string vantage_id;
    std::vector<std::pair<std::string, std::string>> links;
    const auto bad = [&](const std::string& what) {
        throw std::runtime_error("topology file line " + std::to_string(lineno) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.starts_with("#topo")) {
            const auto kv = formats::parse_kv(line.substr(5));
            if (const auto it = kv.find("seed"); it != kv.end())
                t.seed = formats::parse_int<uint64_t>(it->second).value_or(1);
            if (const auto it = kv.find("hop_delay"); it != kv.end())
                t.hop_delay_ms = formats::parse_int<uint32_t>(it->second).value_or(1);
            if (const auto it = kv.find("jitter"); it != kv.end())
                t.jitter_ms = formats::parse_int<uint32_t>(it->second).value_or(0);
            if (const auto it = kv.find("quote"); it != kv.end())
                t.quote_bytes = formats::parse_int<uint16_t>(it->second).value_or(28);
            continue;
        }
        if (line.empty() || line[0] == '#')
            continue;
        const auto f = formats::split_ws(line);
        try {
            if (f[0] == "vantage" && f.size() == 2) {
                vantage_id = std::string(f[1]);
            } else if ((f[0] == "router" || f[0] == "balancer") && f.size() >= 3) {
                const auto iface = IPv4Addr::parse(f[2]);
                if (!iface)
                    bad("bad interface address");
                RouterPolicy pol;
                for (size_t i = 3; i < f.size(); ++i) {
                    const auto kv = formats::parse_kv(f[i]);
                    for (const auto& [k, v] : kv) {
                        if (k == "responds")
                            pol.responds = v != "0";
                        else if (k == "rate")
                            pol.rate_limit = std::stod(v);
                        else if (k == "loss")
                            pol.loss_prob = std::stod(v);
                        else
                            bad("unknown router attribute " + k);
                    }
                }
                t.add_router(std::string(f[1]), *iface, f[0] == "balancer", pol);
            } else if (f[0] == "link" && f.size() == 3) {
                links.emplace_back(std::string(f[1]), std::string(f[2]));
            } else if (f[0] == "dest" && (f.size() == 3 || f.size() == 4)) {
                const auto addr = IPv4Addr::parse(f[1]);
                if (!addr)
                    bad("bad destination address");
                DestReply reply = DestReply::tcp;
                if (f.size() == 4) {
                    if (f[3] == "reply=unreach")
                        reply = DestReply::unreach;
                    else if (f[3] != "reply=tcp")
                        bad("unknown destination attribute");
                }
                t.add_dest(*addr, f[2], reply);
            } else {
                bad("unrecognized directive");
            }
        } catch (const std::invalid_argument& e) {
            bad(e.what());
        }
    }
    if (vantage_id.empty())
        throw std::runtime_error("topology file: missing vantage line");
    try {
        for (const auto& [a, b] : links)
            t.add_link(a, b);
        t.set_entry(vantage_id);
        t.finalize();
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(std::string("topology file: ") + e.what());
    }
    return t;
}

// Deterministic generator: a level tree whose width profile peaks near
// depth 14, with a share of routers converted into 2-way balancer
// diamonds, and destinations attached with the same depth profile.
struct TopoSpec {
    uint32_t destinations = 1000;
    uint32_t max_depth = 20;
    double balancer_density = 0.0; // fraction of eligible routers diamondized
    uint64_t seed = 1;
    uint32_t router_budget = 0; // 0: derived from destinations
};

inline SimTopology generate_topology(const TopoSpec& spec) {
    if (spec.destinations == 0 || spec.max_depth == 0 || spec.max_depth > 64 ||
        spec.balancer_density < 0 || spec.balancer_density > 1)
        throw std::invalid_argument("topology spec: need destinations>0, depth in [1,64], "
                                    "density in [0,1]");
    uint64_t rng = splitmix64(spec.seed ^ 0xD1B54A32D192ED03ull);
    const auto next = [&rng]() {
        rng = splitmix64(rng);
        return rng;
    };

    SimTopology t;
    t.seed = spec.seed;

    // Width profile: Gaussian bump over depth, peak at 14 (or the deepest
    // level when shallower).
    const double peak = double(std::min<uint32_t>(14, spec.max_depth));
    const double sigma = std::max(2.0, double(spec.max_depth) / 4.0);
    std::vector<double> w(spec.max_depth + 1, 0.0);
    double wsum = 0;
    for (uint32_t d = 1; d <= spec.max_depth; ++d) {
        w[d] = std::exp(-(d - peak) * (d - peak) / (2 * sigma * sigma));
        wsum += w[d];
    }
    const uint32_t budget =
        spec.router_budget ? spec.router_budget
                           : std::max(spec.max_depth, spec.destinations / 2 + spec.max_depth);
    std::vector<uint32_t> width(spec.max_depth + 1, 0);
    for (uint32_t d = 1; d <= spec.max_depth; ++d)
        width[d] = std::max<uint32_t>(1, uint32_t(std::lround(budget * w[d] / wsum)));
    width[1] = 1; // single entry router

    const auto iface = [](uint32_t depth, uint32_t i) {
        return IPv4Addr(10, uint8_t(depth), uint8_t(i >> 8), uint8_t(i & 0xFF));
    };
    const auto rname = [](uint32_t depth, uint32_t i) {
        return "r" + std::to_string(depth) + "_" + std::to_string(i);
    };

    std::vector<std::vector<std::string>> level(spec.max_depth + 1);
    for (uint32_t d = 1; d <= spec.max_depth; ++d) {
        if (width[d] > 0xFFFF)
            throw std::invalid_argument("topology spec: level width above 65536");
        for (uint32_t i = 0; i < width[d]; ++i) {
            const auto id = rname(d, i);
            t.add_router(id, iface(d, i));
            level[d].push_back(id);
            if (d > 1)
                t.add_link(level[d - 1][next() % width[d - 1]], id);
        }
    }
    t.set_entry(level[1][0]);

    // Diamonds: a router at depth d<=max-2 with a tree child C that itself
    // has children gets a twin branch T; B balances between C and T, both
    // reaching C's children.  Twin interfaces live in 10.128.x.y.
    if (spec.balancer_density > 0) {
        // Collect tree children before mutating.
        std::map<std::string, std::vector<std::string>> children;
        for (const auto& r : t.routers())
            for (uint32_t j : r.next)
                children[r.id].push_back(t.routers()[j].id);
        uint32_t twins = 0;
        for (uint32_t d = 1; d + 2 <= spec.max_depth; ++d) {
            for (const auto& bid : level[d]) {
                const auto bit = children.find(bid);
                if (bit == children.end() || bit->second.empty())
                    continue;
                const auto& cid = bit->second[0];
                const auto cit = children.find(cid);
                if (cit == children.end() || cit->second.empty())
                    continue;
                const double roll = double(next() >> 11) * 0x1p-53;
                if (roll >= spec.balancer_density)
                    continue;
                const auto tid = "t" + std::to_string(d + 1) + "_" + std::to_string(twins);
                t.add_twin_balancer(bid, tid,
                                    IPv4Addr(10, 128, uint8_t(twins >> 8), uint8_t(twins)),
                                    cit->second);
                ++twins;
                if (twins > 0xFFFF)
                    throw std::invalid_argument("topology spec: too many balancer twins");
            }
        }
    }

    // Destinations in 198.18.0.0/15, depth-profiled attachment.
    if (spec.destinations > 0x1FFFF)
        throw std::invalid_argument("topology spec: too many destinations");
    for (uint32_t i = 0; i < spec.destinations; ++i) {
        double pick = double(next() >> 11) * 0x1p-53 * wsum;
        uint32_t d = spec.max_depth;
        for (uint32_t k = 1; k <= spec.max_depth; ++k) {
            if (pick < w[k]) {
                d = k;
                break;
            }
            pick -= w[k];
        }
        const auto& rid = level[d][next() % width[d]];
        t.add_dest(IPv4Addr(198, uint8_t(18 + (i >> 16)), uint8_t(i >> 8), uint8_t(i)), rid);
    }

    t.finalize();
    return t;
}

// Simulated transport: replies are scheduled at virtual timestamps derived
// from the probe's own elapsed stamp, so runs are byte-reproducible.
class SimTransport final : public Transport {
  public:
    SimTransport(SimTopology topo, uint32_t units_per_sec = 1000)
        : topo_(std::move(topo)), ups_(units_per_sec) {
        const uint64_t per_ms = units_per_sec / 1000;
        hop_delay_units_ = topo_.hop_delay_ms * (per_ms ? per_ms : 1);
        jitter_units_ = topo_.jitter_ms * (per_ms ? per_ms : 1);
        tokens_.assign(topo_.routers().size(), 1.0);
        token_time_.assign(topo_.routers().size(), 0);
        token_started_.assign(topo_.routers().size(), 0);
        rolls_.assign(topo_.routers().size(), 0);
    }

    const SimTopology& topology() const { return topo_; }

    void send(std::span<const uint8_t> packet, IPv4Addr) override {
        ++injected_;
        auto emit = inject(packet);
        if (!emit)
            return;
        pending_.push(Pending{emit->arrival, order_++, std::move(emit->reply)});
        peak_pending_ = std::max(peak_pending_, pending_.size());
    }

    std::optional<RawReply> poll(uint64_t now_units) override {
        if (pending_.empty() || pending_.top().arrival > now_units)
            return std::nullopt;
        return pop();
    }

    std::optional<RawReply> wait_remaining() override {
        if (pending_.empty())
            return std::nullopt;
        return pop();
    }

    size_t peak_pending() const { return peak_pending_; }
    uint64_t injected() const { return injected_; }

  private:
    struct Pending {
        uint64_t arrival;
        uint64_t order;
        RawReply reply;
        bool operator>(const Pending& o) const {
            return arrival != o.arrival ? arrival > o.arrival : order > o.order;
        }
    };

    struct Emit {
        RawReply reply;
        uint64_t arrival;
    };

    std::optional<RawReply> pop() {
        RawReply r = std::move(const_cast<Pending&>(pending_.top()).reply);
        r.recv_elapsed = pending_.top().arrival;
        pending_.pop();
        return r;
    }

    // TTL-expiry / delivery semantics for one probe.  The probe's virtual
    // send time is its own tcp_seq stamp; every derived time is exact.
    std::optional<Emit> inject(std::span<const uint8_t> probe) {
        if (probe.size() < 40 || (probe[0] >> 4) != 4 || probe[9] != 6)
            return std::nullopt;
        const size_t ihl = size_t(probe[0] & 0x0F) * 4;
        if (ihl < 20 || probe.size() < ihl + 20)
            return std::nullopt;
        const uint32_t src = get_be32(probe.subspan(12, 4));
        const uint32_t dst = get_be32(probe.subspan(16, 4));
        const uint8_t ttl = probe[8];
        const auto tcp = probe.subspan(ihl);
        const uint16_t sport = get_be16(tcp.subspan(0, 2));
        const uint16_t dport = get_be16(tcp.subspan(2, 2));
        const uint32_t seq = get_be32(tcp.subspan(4, 4));
        const uint32_t ack = get_be32(tcp.subspan(8, 4));
        const bool syn_probe = (tcp[13] & 0x02) != 0;

        const Destination* dest = topo_.find_dest(IPv4Addr(dst));
        if (!dest || ttl == 0)
            return std::nullopt;
        const uint64_t fh = flow_hash(src, dst, sport, dport, 6, topo_.seed);
        const auto path = topo_.route(IPv4Addr(dst), fh);
        const uint32_t m = uint32_t(path.size());
        const uint64_t sent = seq;

        if (ttl <= m) {
            const uint32_t k = ttl;
            const Router& r = topo_.routers()[path[k - 1]];
            if (!r.policy.responds)
                return std::nullopt;
            if (r.policy.rate_limit > 0 && !take_token(path[k - 1], sent + k * hop_delay_units_,
                                                       r.policy.rate_limit))
                return std::nullopt;
            if (r.policy.loss_prob > 0 && roll(path[k - 1]) < r.policy.loss_prob)
                return std::nullopt;
            Emit e;
            e.reply.packet = icmp_reply(11, 0, r.iface, IPv4Addr(src), uint8_t(64 - (k - 1)),
                                        probe, uint8_t(0));
            e.reply.outer_src = r.iface;
            e.arrival = sent + 2 * uint64_t(k) * hop_delay_units_ + jitter();
            return e;
        }

        Emit e;
        e.arrival = sent + 2 * uint64_t(m + 1) * hop_delay_units_ + jitter();
        e.reply.outer_src = dest->addr;
        if (dest->reply == DestReply::unreach) {
            e.reply.packet = icmp_reply(3, 3, dest->addr, IPv4Addr(src), uint8_t(64 - m), probe,
                                        uint8_t(ttl - m));
            return e;
        }
        std::array<uint8_t, 40> p{};
        p[0] = 0x45;
        put_be16({p.data() + 2, 2}, 40);
        p[8] = uint8_t(64 - m);
        p[9] = 6;
        put_be32({p.data() + 12, 4}, dst);
        put_be32({p.data() + 16, 4}, src);
        put_be16({p.data() + 10, 2}, wire::cksum({p.data(), 20}));
        uint8_t* th = p.data() + 20;
        put_be16({th, 2}, 80);
        put_be16({th + 2, 2}, sport);
        if (syn_probe) {
            put_be32({th + 4, 4}, uint32_t(splitmix64(topo_.seed ^ dst)));
            put_be32({th + 8, 4}, seq + 1);
            th[13] = 0x12; // SYN|ACK
        } else {
            put_be32({th + 4, 4}, ack);
            th[13] = 0x04; // RST
        }
        th[12] = 0x50;
        put_be16({th + 16, 2}, wire::tcp_cksum(dest->addr, IPv4Addr(src), {th, 20}));
        e.reply.packet.assign(p.begin(), p.end());
        return e;
    }

    bool take_token(uint32_t router, uint64_t now_units, double rate) {
        if (!token_started_[router]) {
            token_started_[router] = 1;
            token_time_[router] = now_units;
        }
        const uint64_t dt = now_units - token_time_[router];
        token_time_[router] = now_units;
        tokens_[router] = std::min(1.0, tokens_[router] + double(dt) / ups_ * rate);
        if (tokens_[router] >= 1.0) {
            tokens_[router] -= 1.0;
            return true;
        }
        return false;
    }

    double roll(uint32_t router) {
        const uint64_t c = ++rolls_[router];
        return double(splitmix64(topo_.seed ^ (uint64_t(router) << 32) ^ c) >> 11) * 0x1p-53;
    }

    uint64_t jitter() {
        if (jitter_units_ == 0)
            return 0;
        return splitmix64(topo_.seed ^ 0xA5A5A5A5ull ^ ++jitter_counter_) % (jitter_units_ + 1);
    }

    // ICMP error sourced from `from`, quoting the probe as it looked at the
    // quoting point (TTL rewritten, header checksum redone).
    std::vector<uint8_t> icmp_reply(uint8_t type, uint8_t code, IPv4Addr from, IPv4Addr to,
                                    uint8_t reply_ttl, std::span<const uint8_t> probe,
                                    uint8_t remaining_ttl) {
        const size_t quote_len = std::min<size_t>(topo_.quote_bytes, probe.size());
        std::vector<uint8_t> quote(probe.begin(), probe.begin() + quote_len);
        if (quote_len >= 20) {
            quote[8] = remaining_ttl;
            quote[10] = quote[11] = 0;
            put_be16({quote.data() + 10, 2}, wire::cksum({quote.data(), 20}));
        }
        std::vector<uint8_t> p(20 + 8 + quote.size(), 0);
        p[0] = 0x45;
        put_be16({p.data() + 2, 2}, uint16_t(p.size()));
        p[8] = reply_ttl;
        p[9] = 1;
        put_be32({p.data() + 12, 4}, from.value());
        put_be32({p.data() + 16, 4}, to.value());
        put_be16({p.data() + 10, 2}, wire::cksum({p.data(), 20}));
        p[20] = type;
        p[21] = code;
        std::copy(quote.begin(), quote.end(), p.begin() + 28);
        put_be16({p.data() + 22, 2}, wire::cksum({p.data() + 20, p.size() - 20}));
        return p;
    }

    SimTopology topo_;
    uint32_t ups_;
    uint64_t hop_delay_units_ = 1;
    uint64_t jitter_units_ = 0;
    std::priority_queue<Pending, std::vector<Pending>, std::greater<>> pending_;
    uint64_t order_ = 0;
    uint64_t injected_ = 0;
    size_t peak_pending_ = 0;
    std::vector<double> tokens_;
    std::vector<uint64_t> token_time_;
    std::vector<uint8_t> token_started_;
    std::vector<uint64_t> rolls_;
    uint64_t jitter_counter_ = 0;
};

} // namespace strobe::simnet
