#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "strobe/formats.hpp"
#include "strobe/ipv4.hpp"
#include "strobe/recon.hpp"

namespace strobe::analyze {

// --- interface graph ---------------------------------------------------------

struct InterfaceGraph {
    std::set<uint32_t> nodes;
    std::set<std::pair<uint32_t, uint32_t>> edges; // normalized lo < hi
};

// Nodes are addressed hops (stitched counts as observed); edges join hops
// at consecutive TTLs.  Anonymous hops break adjacency; self-loops are
// dropped.
inline InterfaceGraph build_graph(const std::vector<recon::TracePath>& paths) {
    InterfaceGraph g;
    for (const auto& p : paths) {
        for (size_t i = 0; i < p.hops.size(); ++i) {
            if (!p.hops[i].addr)
                continue;
            const uint32_t a = p.hops[i].addr->value();
            g.nodes.insert(a);
            if (i + 1 < p.hops.size() && p.hops[i + 1].addr &&
                p.hops[i + 1].ttl == p.hops[i].ttl + 1) {
                const uint32_t b = p.hops[i + 1].addr->value();
                if (a != b)
                    g.edges.insert({std::min(a, b), std::max(a, b)});
            }
        }
    }
    return g;
}

inline std::map<size_t, size_t> degree_distribution(const InterfaceGraph& g) {
    std::unordered_map<uint32_t, size_t> degree;
    for (uint32_t n : g.nodes)
        degree[n] = 0;
    for (const auto& [a, b] : g.edges) {
        ++degree[a];
        ++degree[b];
    }
    std::map<size_t, size_t> hist;
    for (const auto& [node, d] : degree)
        ++hist[d];
    return hist;
}

// --- discovery curve ---------------------------------------------------------

// Cumulative count of distinct responder addresses over elapsed time; one
// point per time at which the count grew.
inline std::vector<std::pair<uint64_t, uint64_t>>
discovery_curve(const formats::ResponseFile& file) {
    std::vector<const wire::ResponseRecord*> recs;
    recs.reserve(file.records.size());
    for (const auto& r : file.records)
        recs.push_back(&r);
    std::stable_sort(recs.begin(), recs.end(),
                     [](const auto* a, const auto* b) { return a->recv_time < b->recv_time; });
    std::vector<std::pair<uint64_t, uint64_t>> out;
    std::unordered_set<uint32_t> seen;
    for (const auto* r : recs) {
        if (!seen.insert(r->hop_addr.value()).second)
            continue;
        if (!out.empty() && out.back().first == r->recv_time)
            out.back().second = seen.size();
        else
            out.emplace_back(r->recv_time, seen.size());
    }
    return out;
}

// --- gap-limit comparison ------------------------------------------------------

struct GapDiffResult {
    std::vector<std::pair<IPv4Addr, int>> per_target; // sorted by target
    std::vector<std::pair<int, double>> cdf;          // (difference, fraction <= it)
};

// Highest responsive TTL of the path after emulating a prober that gives
// up after `gap` consecutive anonymous hops.
inline uint8_t gap_truncated_max(const recon::TracePath& p, unsigned gap) {
    unsigned run = 0;
    uint8_t max_resp = 0;
    for (const auto& h : p.hops) {
        if (h.addr) {
            run = 0;
            max_resp = h.ttl;
        } else if (++run >= gap) {
            break;
        }
    }
    return max_resp;
}

inline GapDiffResult gap_limit_diff(const std::vector<recon::TracePath>& paths_a,
                                    const std::vector<recon::TracePath>& paths_b,
                                    unsigned gap = 5) {
    if (gap == 0)
        throw std::invalid_argument("gap_limit_diff: gap must be positive");
    std::map<uint32_t, const recon::TracePath*> b_by_target;
    for (const auto& p : paths_b)
        b_by_target[p.target.value()] = &p;
    GapDiffResult res;
    for (const auto& a : paths_a) {
        const auto it = b_by_target.find(a.target.value());
        if (it == b_by_target.end())
            continue;
        const int diff = int(a.max_responsive_ttl) - int(gap_truncated_max(*it->second, gap));
        res.per_target.emplace_back(a.target, diff);
    }
    if (res.per_target.empty())
        throw std::invalid_argument("gap_limit_diff: no shared targets");
    std::sort(res.per_target.begin(), res.per_target.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    std::vector<int> diffs;
    for (const auto& [t, d] : res.per_target)
        diffs.push_back(d);
    std::sort(diffs.begin(), diffs.end());
    for (size_t i = 0; i < diffs.size(); ++i) {
        if (i + 1 < diffs.size() && diffs[i + 1] == diffs[i])
            continue;
        res.cdf.emplace_back(diffs[i], double(i + 1) / double(diffs.size()));
    }
    return res;
}

// --- path edit distance --------------------------------------------------------

enum class EditOp : uint8_t { substitute, insert, erase };

struct Edit {
    EditOp op = EditOp::substitute;
    uint8_t depth_a = 0; // ttl on the first path (substitute/erase)
    uint8_t depth_b = 0; // ttl on the second path (substitute/insert)
    bool missing_hop = false;
    uint8_t missing_depth = 0; // ttl of the anonymous side of a missing-hop substitution
};

struct PathDiff {
    IPv4Addr target;
    uint32_t distance = 0;
    std::vector<Edit> operations;
    uint32_t missing_hop_substitutions = 0;
};

namespace detail {

inline constexpr uint64_t kAnon = uint64_t(1) << 40;

struct Symbol {
    uint64_t value = kAnon;
    uint8_t ttl = 0;
    bool anon() const { return value == kAnon; }
};

// Hop symbols above the depth cutoff, normalized to one shared length:
// trimmed of the all-anonymous tail beyond the deepest addressed hop of
// either path, then padded with anonymous symbols up to that depth.
// Appending a common anonymous suffix never changes a Levenshtein
// distance, so the normalized distance is independent of which pair is
// being compared and the metric laws carry over from plain Levenshtein.
inline std::pair<std::vector<Symbol>, std::vector<Symbol>>
symbolize(const recon::TracePath& a, const recon::TracePath& b, uint8_t cutoff) {
    const auto effective_depth = [](const recon::TracePath& p) {
        uint8_t d = 0;
        for (const auto& h : p.hops)
            if (h.addr)
                d = h.ttl;
        return d;
    };
    const uint8_t tmax = std::max(effective_depth(a), effective_depth(b));
    const size_t span = tmax > cutoff ? size_t(tmax) - cutoff : 0;
    const auto take = [&](const recon::TracePath& p) {
        std::vector<Symbol> s;
        for (const auto& h : p.hops)
            if (h.ttl > cutoff && h.ttl <= tmax)
                s.push_back(Symbol{h.addr ? h.addr->value() : kAnon, h.ttl});
        while (s.size() < span)
            s.push_back(Symbol{kAnon, uint8_t(cutoff + s.size() + 1)});
        return s;
    };
    return {take(a), take(b)};
}

} // namespace detail

// Levenshtein over hop symbols, anonymous as its own symbol.  Backtrace is
// deterministic (substitution, then erase, then insert on cost ties); a
// substitution with exactly one anonymous side is a missing-hop
// substitution.
inline PathDiff path_edit_distance(const recon::TracePath& a, const recon::TracePath& b,
                                   uint8_t cutoff = 0) {
    if (a.target != b.target)
        throw std::invalid_argument("path_edit_distance: target mismatch");
    PathDiff diff;
    diff.target = a.target;
    const auto [sa, sb] = detail::symbolize(a, b, cutoff);
    const size_t m = sa.size(), n = sb.size();
    std::vector<uint32_t> dp((m + 1) * (n + 1));
    const auto at = [&](size_t i, size_t j) -> uint32_t& { return dp[i * (n + 1) + j]; };
    for (size_t i = 0; i <= m; ++i)
        at(i, 0) = uint32_t(i);
    for (size_t j = 0; j <= n; ++j)
        at(0, j) = uint32_t(j);
    for (size_t i = 1; i <= m; ++i)
        for (size_t j = 1; j <= n; ++j) {
            const uint32_t sub = at(i - 1, j - 1) + (sa[i - 1].value == sb[j - 1].value ? 0 : 1);
            at(i, j) = std::min({sub, at(i - 1, j) + 1, at(i, j - 1) + 1});
        }
    diff.distance = at(m, n);

    size_t i = m, j = n;
    std::vector<Edit> ops;
    while (i > 0 || j > 0) {
        if (i > 0 && j > 0 &&
            at(i, j) == at(i - 1, j - 1) + (sa[i - 1].value == sb[j - 1].value ? 0 : 1)) {
            if (sa[i - 1].value != sb[j - 1].value) {
                Edit e;
                e.op = EditOp::substitute;
                e.depth_a = sa[i - 1].ttl;
                e.depth_b = sb[j - 1].ttl;
                e.missing_hop = sa[i - 1].anon() != sb[j - 1].anon();
                if (e.missing_hop)
                    e.missing_depth = sa[i - 1].anon() ? e.depth_a : e.depth_b;
                ops.push_back(e);
            }
            --i;
            --j;
        } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
            ops.push_back(Edit{EditOp::erase, sa[i - 1].ttl, 0, false});
            --i;
        } else {
            ops.push_back(Edit{EditOp::insert, 0, sb[j - 1].ttl, false});
            --j;
        }
    }
    std::reverse(ops.begin(), ops.end());
    for (const auto& e : ops)
        if (e.missing_hop)
            ++diff.missing_hop_substitutions;
    diff.operations = std::move(ops);
    return diff;
}

// --- snapshot comparison --------------------------------------------------------

struct SnapshotComparison {
    std::vector<PathDiff> per_target; // shared targets, sorted by target
    std::vector<std::pair<uint32_t, double>> distance_cdf;
    uint64_t substitutions = 0; // non-missing-hop substitutions
    uint64_t missing_hop_substitutions = 0;
    uint64_t insertions = 0;
    uint64_t deletions = 0;
    std::map<uint8_t, uint64_t> missing_by_depth; // depth of the anonymous side
    bool empty_intersection = false;
};

inline SnapshotComparison snapshot_compare(const std::vector<recon::TracePath>& s1,
                                           const std::vector<recon::TracePath>& s2,
                                           uint8_t cutoff = 0) {
    SnapshotComparison c;
    std::map<uint32_t, const recon::TracePath*> second;
    for (const auto& p : s2)
        second[p.target.value()] = &p;
    for (const auto& p : s1) {
        const auto it = second.find(p.target.value());
        if (it == second.end())
            continue;
        c.per_target.push_back(path_edit_distance(p, *it->second, cutoff));
    }
    if (c.per_target.empty()) {
        c.empty_intersection = true;
        return c;
    }
    std::sort(c.per_target.begin(), c.per_target.end(),
              [](const PathDiff& x, const PathDiff& y) { return x.target < y.target; });
    for (const auto& d : c.per_target)
        for (const auto& e : d.operations) {
            switch (e.op) {
            case EditOp::substitute:
                if (e.missing_hop) {
                    ++c.missing_hop_substitutions;
                    ++c.missing_by_depth[e.missing_depth];
                } else {
                    ++c.substitutions;
                }
                break;
            case EditOp::insert: ++c.insertions; break;
            case EditOp::erase: ++c.deletions; break;
            }
        }
    std::vector<uint32_t> dist;
    for (const auto& d : c.per_target)
        dist.push_back(d.distance);
    std::sort(dist.begin(), dist.end());
    for (size_t i = 0; i < dist.size(); ++i) {
        if (i + 1 < dist.size() && dist[i + 1] == dist[i])
            continue;
        c.distance_cdf.emplace_back(dist[i], double(i + 1) / double(dist.size()));
    }
    return c;
}

// --- plot-ready emitters ---------------------------------------------------------

inline void emit_degree_histogram(std::ostream& out, const std::map<size_t, size_t>& hist) {
    out << "# degree node_count\n";
    for (const auto& [deg, count] : hist)
        out << deg << ' ' << count << "\n";
}

inline void emit_discovery_curve(std::ostream& out,
                                 const std::vector<std::pair<uint64_t, uint64_t>>& curve) {
    out << "# elapsed unique_interfaces\n";
    for (const auto& [t, n] : curve)
        out << t << ' ' << n << "\n";
}

inline void emit_gap_diff(std::ostream& out, const GapDiffResult& g) {
    out << "# target ttl_difference\n";
    for (const auto& [t, d] : g.per_target)
        out << t.to_string() << ' ' << d << "\n";
    out << "# difference cdf\n";
    for (const auto& [d, f] : g.cdf)
        out << d << ' ' << f << "\n";
}

inline void emit_comparison(std::ostream& out, const SnapshotComparison& c) {
    if (c.empty_intersection) {
        out << "# warning: no shared targets\n";
        return;
    }
    out << "# distance cdf\n";
    for (const auto& [d, f] : c.distance_cdf)
        out << d << ' ' << f << "\n";
    out << "# op count\n";
    out << "substitution " << c.substitutions << "\n";
    out << "missing_hop_substitution " << c.missing_hop_substitutions << "\n";
    out << "insertion " << c.insertions << "\n";
    out << "deletion " << c.deletions << "\n";
    out << "# missing_hop_depth count\n";
    for (const auto& [depth, count] : c.missing_by_depth)
        out << int(depth) << ' ' << count << "\n";
}

} // namespace strobe::analyze
