#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "strobe/formats.hpp"
#include "strobe/ipv4.hpp"
#include "strobe/wire.hpp"

namespace strobe::recon {

enum class Provenance : uint8_t { observed, stitched, anonymous };

struct TraceHop {
    uint8_t ttl = 0;
    std::optional<IPv4Addr> addr; // absent = anonymous
    std::optional<uint32_t> rtt;
    Provenance provenance = Provenance::anonymous;
};

// One reconstructed trace: one hop entry per probed TTL, ascending.
struct TracePath {
    IPv4Addr target;
    std::vector<TraceHop> hops;
    uint8_t max_responsive_ttl = 0; // greatest ttl with an observed hop
    bool destination_reached = false;
};

struct ReconStats {
    uint64_t duplicates = 0;  // extra records for an already-filled (target, ttl)
    uint64_t quarantined = 0; // records whose ttl is outside the run's range
    std::vector<std::string> warnings;
};

struct ReconResult {
    std::vector<TracePath> paths; // sorted by target address
    ReconStats stats;
};

// addr -> (observation count, arrival order of first observation)
using DepthTally = std::unordered_map<uint32_t, std::pair<uint64_t, uint64_t>>;

// Dominant interface at a suppressed depth: highest count, ties to the
// earliest first observation.  Nothing ever seen there -> anonymous.
inline TraceHop stitch(const DepthTally& tally, uint8_t depth) {
    TraceHop h;
    h.ttl = depth;
    if (tally.empty())
        return h;
    uint32_t best_addr = 0;
    uint64_t best_count = 0, best_order = ~uint64_t(0);
    for (const auto& [addr, stat] : tally) {
        const auto [count, order] = stat;
        if (count > best_count || (count == best_count && order < best_order)) {
            best_addr = addr;
            best_count = count;
            best_order = order;
        }
    }
    h.addr = IPv4Addr(best_addr);
    h.provenance = Provenance::stitched;
    return h;
}

// Offline conversion of the unordered response stream into per-target
// paths.  Holds everything in memory; sort the file by target first if the
// machine cannot.
inline ReconResult reconstruct(const formats::ResponseFile& file) {
    const auto& m = file.meta;
    ReconResult res;
    std::vector<DepthTally> tally(size_t(m.nbrhd_ttl) + 1);

    struct Slot {
        const wire::ResponseRecord* rec = nullptr;
    };
    struct Acc {
        std::map<uint8_t, Slot> by_ttl;
        bool reached = false;
    };
    std::map<uint32_t, Acc> acc; // keyed by target address: output comes out sorted

    uint64_t order = 0;
    for (const auto& r : file.records) {
        ++order;
        if (r.response_type == wire::ResponseType::tcp_reply) {
            acc[r.target.value()].reached = true;
            continue;
        }
        if (r.sent_ttl < m.ttl_min || r.sent_ttl > m.ttl_max) {
            ++res.stats.quarantined;
            if (res.stats.warnings.size() < 10)
                res.stats.warnings.push_back("quarantined record for " + r.target.to_string() +
                                             " at ttl " + std::to_string(r.sent_ttl) +
                                             " outside run range");
            continue;
        }
        auto& a = acc[r.target.value()];
        if (r.response_type == wire::ResponseType::echo_of_target || r.hop_addr == r.target)
            a.reached = true;
        if (r.sent_ttl <= m.nbrhd_ttl) {
            auto& t = tally[r.sent_ttl][r.hop_addr.value()];
            if (t.first++ == 0)
                t.second = order;
        }
        const auto [it, fresh] = a.by_ttl.try_emplace(r.sent_ttl, Slot{&r});
        if (!fresh)
            ++res.stats.duplicates; // keep the earliest arrival
        (void)it;
    }

    for (const auto& [addr, a] : acc) {
        TracePath p;
        p.target = IPv4Addr(addr);
        p.destination_reached = a.reached;
        for (uint32_t ttl = m.ttl_min; ttl <= m.ttl_max; ++ttl) {
            const auto it = a.by_ttl.find(uint8_t(ttl));
            if (it != a.by_ttl.end()) {
                TraceHop h;
                h.ttl = uint8_t(ttl);
                h.addr = it->second.rec->hop_addr;
                h.rtt = it->second.rec->rtt;
                h.provenance = Provenance::observed;
                p.hops.push_back(h);
                p.max_responsive_ttl = uint8_t(ttl);
            } else if (ttl <= m.nbrhd_ttl) {
                p.hops.push_back(stitch(tally[ttl], uint8_t(ttl)));
            } else {
                TraceHop h;
                h.ttl = uint8_t(ttl);
                p.hops.push_back(h);
            }
        }
        res.paths.push_back(std::move(p));
    }
    return res;
}

// --- path file -------------------------------------------------------------

struct PathFileMeta {
    std::string units = "ms";
    uint8_t ttl_min = 1;
    uint8_t ttl_max = 32;
    uint8_t nbrhd_ttl = 0;
};

struct PathFile {
    PathFileMeta meta;
    std::vector<TracePath> paths;
};

inline char provenance_letter(Provenance p) {
    switch (p) {
    case Provenance::observed: return 'O';
    case Provenance::stitched: return 'S';
    case Provenance::anonymous: return 'A';
    }
    return '?';
}

inline void write_paths(std::ostream& out, const PathFileMeta& meta,
                        const std::vector<TracePath>& paths) {
    out << "#pth v=1 units=" << meta.units << " ttl_min=" << int(meta.ttl_min)
        << " ttl_max=" << int(meta.ttl_max) << " nbrhd=" << int(meta.nbrhd_ttl)
        << " targets=" << paths.size() << "\n";
    for (const auto& p : paths) {
        out << p.target.to_string() << " reached=" << (p.destination_reached ? 1 : 0)
            << " max_ttl=" << int(p.max_responsive_ttl);
        for (const auto& h : p.hops) {
            out << ' ' << int(h.ttl) << ':';
            if (h.addr)
                out << h.addr->to_string();
            else
                out << '*';
            out << ':';
            if (h.rtt)
                out << *h.rtt;
            else
                out << '-';
            out << ':' << provenance_letter(h.provenance);
        }
        out << "\n";
    }
}

inline PathFile read_paths(std::istream& in) {
    PathFile f;
    std::string line;
    if (!std::getline(in, line) || !line.starts_with("#pth "))
        throw std::runtime_error("path file: missing #pth header");
    {
        const auto kv = formats::parse_kv(std::string_view(line).substr(5));
        if (const auto it = kv.find("units"); it != kv.end())
            f.meta.units = it->second;
        const auto geti = [&](const char* k, uint8_t dflt) {
            const auto it = kv.find(k);
            if (it == kv.end())
                return dflt;
            const auto v = formats::parse_int<uint16_t>(it->second);
            if (!v || *v > 255)
                throw std::runtime_error(std::string("path file: bad header field ") + k);
            return uint8_t(*v);
        };
        f.meta.ttl_min = geti("ttl_min", 1);
        f.meta.ttl_max = geti("ttl_max", 32);
        f.meta.nbrhd_ttl = geti("nbrhd", 0);
    }
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line[0] == '#')
            continue;
        const auto bad = [&](const char* what) {
            throw std::runtime_error("path file line " + std::to_string(lineno) + ": " + what);
        };
        const auto toks = formats::split_ws(line);
        if (toks.size() < 3)
            bad("short record");
        TracePath p;
        const auto target = IPv4Addr::parse(toks[0]);
        if (!target)
            bad("bad target");
        p.target = *target;
        const auto kv = formats::parse_kv(line);
        if (const auto it = kv.find("reached"); it != kv.end())
            p.destination_reached = it->second == "1";
        if (const auto it = kv.find("max_ttl"); it != kv.end()) {
            const auto v = formats::parse_int<uint16_t>(it->second);
            if (!v || *v > 255)
                bad("bad max_ttl");
            p.max_responsive_ttl = uint8_t(*v);
        }
        for (size_t i = 3; i < toks.size(); ++i) {
            const std::string_view t = toks[i];
            size_t c1 = t.find(':');
            size_t c2 = c1 == std::string_view::npos ? c1 : t.find(':', c1 + 1);
            size_t c3 = c2 == std::string_view::npos ? c2 : t.find(':', c2 + 1);
            if (c3 == std::string_view::npos)
                bad("bad hop token");
            TraceHop h;
            const auto ttl = formats::parse_int<uint16_t>(t.substr(0, c1));
            if (!ttl || *ttl == 0 || *ttl > 255)
                bad("bad hop ttl");
            h.ttl = uint8_t(*ttl);
            const auto addr_s = t.substr(c1 + 1, c2 - c1 - 1);
            if (addr_s != "*") {
                const auto a = IPv4Addr::parse(addr_s);
                if (!a)
                    bad("bad hop address");
                h.addr = *a;
            }
            const auto rtt_s = t.substr(c2 + 1, c3 - c2 - 1);
            if (rtt_s != "-") {
                const auto v = formats::parse_int<uint32_t>(rtt_s);
                if (!v)
                    bad("bad hop rtt");
                h.rtt = *v;
            }
            const auto prov = t.substr(c3 + 1);
            if (prov == "O")
                h.provenance = Provenance::observed;
            else if (prov == "S")
                h.provenance = Provenance::stitched;
            else if (prov == "A")
                h.provenance = Provenance::anonymous;
            else
                bad("bad hop provenance");
            if (h.provenance != Provenance::anonymous && !h.addr)
                bad("non-anonymous hop without address");
            p.hops.push_back(h);
        }
        f.paths.push_back(std::move(p));
    }
    return f;
}

} // namespace strobe::recon
