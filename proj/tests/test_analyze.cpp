#include <gtest/gtest.h>

#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "strobe/analyze.hpp"

using namespace strobe;
using analyze::EditOp;

namespace {

// Hop i of the list becomes TTL i+1; nullopt is an anonymous hop.
recon::TracePath path(IPv4Addr target, const std::vector<std::optional<uint32_t>>& addrs) {
    recon::TracePath p;
    p.target = target;
    for (size_t i = 0; i < addrs.size(); ++i) {
        recon::TraceHop h;
        h.ttl = uint8_t(i + 1);
        if (addrs[i]) {
            h.addr = IPv4Addr(*addrs[i]);
            h.provenance = recon::Provenance::observed;
            p.max_responsive_ttl = h.ttl;
        }
        p.hops.push_back(h);
    }
    return p;
}

constexpr uint32_t A = 0x0A000001, B = 0x0A000002, C = 0x0A000003, D = 0x0A000004;
const IPv4Addr kT(198, 18, 0, 1);
const IPv4Addr kU(198, 18, 0, 2);

wire::ResponseRecord hop_at(uint32_t addr, uint64_t recv) {
    wire::ResponseRecord r;
    r.target = kT;
    r.sent_ttl = 1;
    r.hop_addr = IPv4Addr(addr);
    r.recv_time = recv;
    return r;
}

} // namespace

TEST(InterfaceGraph, EdgesJoinConsecutiveAddressedHops) {
    const std::vector<recon::TracePath> paths = {
        path(kT, {A, B, C}),
        path(kU, {A, B, D}),
    };
    const auto g = analyze::build_graph(paths);
    EXPECT_EQ(g.nodes.size(), 4u);
    ASSERT_EQ(g.edges.size(), 3u);
    EXPECT_TRUE(g.edges.count({std::min(A, B), std::max(A, B)}));
    EXPECT_TRUE(g.edges.count({std::min(B, C), std::max(B, C)}));
    EXPECT_TRUE(g.edges.count({std::min(B, D), std::max(B, D)}));
}

TEST(InterfaceGraph, AnonymousHopsBreakAdjacency) {
    const auto g = analyze::build_graph({path(kT, {A, std::nullopt, C})});
    EXPECT_EQ(g.nodes.size(), 2u);
    EXPECT_TRUE(g.edges.empty());
}

TEST(InterfaceGraph, SelfLoopsAndDepthHolesProduceNoEdges) {
    const auto loop = analyze::build_graph({path(kT, {A, A})});
    EXPECT_EQ(loop.nodes.size(), 1u);
    EXPECT_TRUE(loop.edges.empty());

    // Hop records at TTL 1 and 3 that happen to sit next to each other.
    recon::TracePath p;
    p.target = kT;
    recon::TraceHop h1, h3;
    h1.ttl = 1;
    h1.addr = IPv4Addr(A);
    h3.ttl = 3;
    h3.addr = IPv4Addr(C);
    p.hops = {h1, h3};
    const auto holes = analyze::build_graph({p});
    EXPECT_EQ(holes.nodes.size(), 2u);
    EXPECT_TRUE(holes.edges.empty());
}

TEST(InterfaceGraph, DegreeDistributionCountsIsolatedNodes) {
    const std::vector<recon::TracePath> paths = {
        path(kT, {A, B, C}),
        path(kU, {A, B, D}),
        path(IPv4Addr(198, 18, 0, 3), {0x0A000009}), // isolated
    };
    const auto hist = analyze::degree_distribution(analyze::build_graph(paths));
    // B has degree 3; A, C, D degree 1; the lone hop degree 0.
    EXPECT_EQ(hist.at(0), 1u);
    EXPECT_EQ(hist.at(1), 3u);
    EXPECT_EQ(hist.at(3), 1u);
    size_t nodes = 0;
    for (const auto& [deg, count] : hist)
        nodes += count;
    EXPECT_EQ(nodes, 5u);
}

TEST(DiscoveryCurve, CountsDistinctAddressesOverTime) {
    formats::ResponseFile f;
    f.records = {hop_at(A, 5), hop_at(B, 5), hop_at(A, 7), hop_at(C, 9)};
    const auto curve = analyze::discovery_curve(f);
    ASSERT_EQ(curve.size(), 2u);
    EXPECT_EQ(curve[0], std::make_pair(uint64_t(5), uint64_t(2)));
    EXPECT_EQ(curve[1], std::make_pair(uint64_t(9), uint64_t(3)));
    EXPECT_TRUE(analyze::discovery_curve(formats::ResponseFile{}).empty());
}

TEST(GapLimit, TruncatedMaxStopsAfterTheConfiguredRun) {
    const auto p = path(kT, {A, std::nullopt, std::nullopt, B});
    EXPECT_EQ(analyze::gap_truncated_max(p, 2), 1);
    EXPECT_EQ(analyze::gap_truncated_max(p, 3), 4);
    EXPECT_EQ(analyze::gap_truncated_max(path(kT, {}), 5), 0);
}

TEST(GapLimit, DiffIsPositiveExactlyForDeepRevivals) {
    // Addressed through TTL 4, silent for 7 hops, addressed again at 12.
    std::vector<std::optional<uint32_t>> deep(12);
    for (int i = 0; i < 4; ++i)
        deep[i] = A + i;
    deep[11] = D;
    const std::vector<recon::TracePath> paths = {
        path(kT, deep),
        path(kU, {A, B, C}),
    };
    const auto res = analyze::gap_limit_diff(paths, paths, 5);
    ASSERT_EQ(res.per_target.size(), 2u);
    EXPECT_EQ(res.per_target[0].first, kT);
    EXPECT_EQ(res.per_target[0].second, 12 - 4);
    EXPECT_EQ(res.per_target[1].second, 0);
    ASSERT_EQ(res.cdf.size(), 2u);
    EXPECT_EQ(res.cdf[0], std::make_pair(0, 0.5));
    EXPECT_EQ(res.cdf[1], std::make_pair(8, 1.0));

    EXPECT_THROW(analyze::gap_limit_diff(paths, paths, 0), std::invalid_argument);
    EXPECT_THROW(analyze::gap_limit_diff(paths, {path(IPv4Addr(9, 9, 9, 9), {A})}, 5),
                 std::invalid_argument);
}

TEST(EditDistance, IdenticalPathsAreAtDistanceZero) {
    const auto p = path(kT, {A, B, C});
    const auto d = analyze::path_edit_distance(p, p);
    EXPECT_EQ(d.distance, 0u);
    EXPECT_TRUE(d.operations.empty());
}

TEST(EditDistance, SubstitutionCarriesBothDepths) {
    const auto d = analyze::path_edit_distance(path(kT, {A, B, C}), path(kT, {A, D, C}));
    EXPECT_EQ(d.distance, 1u);
    ASSERT_EQ(d.operations.size(), 1u);
    EXPECT_EQ(d.operations[0].op, EditOp::substitute);
    EXPECT_EQ(d.operations[0].depth_a, 2);
    EXPECT_EQ(d.operations[0].depth_b, 2);
    EXPECT_FALSE(d.operations[0].missing_hop);
    EXPECT_EQ(d.missing_hop_substitutions, 0u);
}

TEST(EditDistance, AnonymousAgainstAddressedIsAMissingHop) {
    const auto d =
        analyze::path_edit_distance(path(kT, {A, std::nullopt, C}), path(kT, {A, B, C}));
    EXPECT_EQ(d.distance, 1u);
    ASSERT_EQ(d.operations.size(), 1u);
    EXPECT_TRUE(d.operations[0].missing_hop);
    EXPECT_EQ(d.operations[0].missing_depth, 2);
    EXPECT_EQ(d.missing_hop_substitutions, 1u);
}

TEST(EditDistance, HopsPastTheShorterHorizonAreMissingHops) {
    // Both paths are normalized to the deeper horizon, so a hop the other
    // run never resolved reads as a missing hop, not a length change.
    const auto grow = analyze::path_edit_distance(path(kT, {A, B}), path(kT, {A, B, C}));
    EXPECT_EQ(grow.distance, 1u);
    ASSERT_EQ(grow.operations.size(), 1u);
    EXPECT_EQ(grow.operations[0].op, EditOp::substitute);
    EXPECT_TRUE(grow.operations[0].missing_hop);
    EXPECT_EQ(grow.operations[0].missing_depth, 3);

    const auto shrink = analyze::path_edit_distance(path(kT, {A, B, C}), path(kT, {A, B}));
    EXPECT_EQ(shrink.distance, 1u);
    ASSERT_EQ(shrink.operations.size(), 1u);
    EXPECT_TRUE(shrink.operations[0].missing_hop);
    EXPECT_EQ(shrink.operations[0].missing_depth, 3);
}

TEST(EditDistance, ShiftedPathsPreferInsertAndErase) {
    const uint32_t E = 0x0A000005;
    const auto d = analyze::path_edit_distance(path(kT, {A, B, C, D}), path(kT, {B, C, D, E}));
    EXPECT_EQ(d.distance, 2u);
    ASSERT_EQ(d.operations.size(), 2u);
    size_t inserts = 0, erases = 0;
    for (const auto& op : d.operations) {
        inserts += op.op == EditOp::insert;
        erases += op.op == EditOp::erase;
    }
    EXPECT_EQ(inserts, 1u);
    EXPECT_EQ(erases, 1u);
}

TEST(EditDistance, TrailingAnonymousTailsDoNotCount) {
    std::vector<std::optional<uint32_t>> padded = {A, B};
    for (int i = 0; i < 30; ++i)
        padded.push_back(std::nullopt);
    const auto d = analyze::path_edit_distance(path(kT, padded), path(kT, {A, B}));
    EXPECT_EQ(d.distance, 0u);
}

TEST(EditDistance, CutoffExcludesNearDepths) {
    const auto a = path(kT, {A, B, C});
    const auto b = path(kT, {D, B, C});
    EXPECT_EQ(analyze::path_edit_distance(a, b, 0).distance, 1u);
    EXPECT_EQ(analyze::path_edit_distance(a, b, 1).distance, 0u);
}

TEST(EditDistance, MismatchedTargetsAreRejected) {
    EXPECT_THROW(analyze::path_edit_distance(path(kT, {A}), path(kU, {A})),
                 std::invalid_argument);
}

// Exhaustive agreement with a from-scratch recursive implementation over
// every pair of paths of length <= 4 drawn from {two addresses, anonymous}.
TEST(EditDistance, AgreesWithRecursiveOracleExhaustively) {
    std::vector<std::vector<std::optional<uint32_t>>> shapes{{}};
    for (int len = 1; len <= 4; ++len) {
        std::vector<std::vector<std::optional<uint32_t>>> next;
        for (const auto& s : shapes) {
            if (s.size() != size_t(len - 1))
                continue;
            for (const std::optional<uint32_t> sym : {std::optional<uint32_t>(A),
                                                      std::optional<uint32_t>(B),
                                                      std::optional<uint32_t>()}) {
                auto t = s;
                t.push_back(sym);
                next.push_back(std::move(t));
            }
        }
        shapes.insert(shapes.end(), next.begin(), next.end());
    }
    ASSERT_EQ(shapes.size(), 121u);

    static constexpr uint64_t kAnonSym = ~uint64_t(0);
    // Normalize exactly as the implementation defines the distance: cut at
    // the deeper horizon and pad the shorter side with anonymous symbols.
    const auto trim = [](const std::vector<std::optional<uint32_t>>& s, size_t tmax) {
        std::vector<uint64_t> out;
        for (size_t i = 0; i < s.size() && i < tmax; ++i)
            out.push_back(s[i] ? uint64_t(*s[i]) : kAnonSym);
        out.resize(tmax, kAnonSym);
        return out;
    };
    const auto deepest = [](const std::vector<std::optional<uint32_t>>& s) {
        size_t d = 0;
        for (size_t i = 0; i < s.size(); ++i)
            if (s[i])
                d = i + 1;
        return d;
    };
    const auto oracle = [&](const std::vector<uint64_t>& x, const std::vector<uint64_t>& y) {
        std::map<std::pair<size_t, size_t>, uint32_t> memo;
        const std::function<uint32_t(size_t, size_t)> go = [&](size_t i, size_t j) -> uint32_t {
            if (i == 0)
                return uint32_t(j);
            if (j == 0)
                return uint32_t(i);
            const auto key = std::make_pair(i, j);
            if (const auto it = memo.find(key); it != memo.end())
                return it->second;
            const uint32_t best =
                std::min({go(i - 1, j - 1) + (x[i - 1] == y[j - 1] ? 0 : 1),
                          go(i - 1, j) + 1, go(i, j - 1) + 1});
            memo[key] = best;
            return best;
        };
        return go(x.size(), y.size());
    };

    for (const auto& sa : shapes)
        for (const auto& sb : shapes) {
            const size_t tmax = std::max(deepest(sa), deepest(sb));
            const auto want = oracle(trim(sa, tmax), trim(sb, tmax));
            const auto got = analyze::path_edit_distance(path(kT, sa), path(kT, sb)).distance;
            ASSERT_EQ(got, want);
        }
}

TEST(SnapshotCompare, SelfComparisonIsAllZeros) {
    const std::vector<recon::TracePath> s = {path(kT, {A, B, C}), path(kU, {A, B})};
    const auto c = analyze::snapshot_compare(s, s);
    EXPECT_FALSE(c.empty_intersection);
    ASSERT_EQ(c.per_target.size(), 2u);
    ASSERT_EQ(c.distance_cdf.size(), 1u);
    EXPECT_EQ(c.distance_cdf[0], std::make_pair(uint32_t(0), 1.0));
    EXPECT_EQ(c.substitutions + c.missing_hop_substitutions + c.insertions + c.deletions, 0u);
}

TEST(SnapshotCompare, SharedTargetsOnlyAndOpTallies) {
    const std::vector<recon::TracePath> s1 = {
        path(kT, {A, std::nullopt, C}),
        path(kU, {A, B}),
        path(IPv4Addr(198, 18, 0, 7), {A}), // only in s1
    };
    const std::vector<recon::TracePath> s2 = {
        path(kT, {A, B, C}),
        path(kU, {A, D}),
        path(IPv4Addr(198, 18, 0, 8), {A}), // only in s2
    };
    const auto c = analyze::snapshot_compare(s1, s2);
    ASSERT_EQ(c.per_target.size(), 2u);
    EXPECT_EQ(c.missing_hop_substitutions, 1u);
    EXPECT_EQ(c.substitutions, 1u);
    EXPECT_EQ(c.missing_by_depth.at(2), 1u);
    EXPECT_EQ(c.insertions, 0u);
    EXPECT_EQ(c.deletions, 0u);
    ASSERT_EQ(c.distance_cdf.size(), 1u); // both diffs have distance 1
    EXPECT_EQ(c.distance_cdf[0], std::make_pair(uint32_t(1), 1.0));
}

TEST(SnapshotCompare, DisjointTargetSetsAreFlagged) {
    const auto c = analyze::snapshot_compare({path(kT, {A})}, {path(kU, {A})});
    EXPECT_TRUE(c.empty_intersection);
    EXPECT_TRUE(c.per_target.empty());
}

TEST(Emitters, ProducePlotReadyText) {
    std::ostringstream deg;
    analyze::emit_degree_histogram(deg, {{0, 1}, {2, 4}});
    EXPECT_EQ(deg.str(), "# degree node_count\n0 1\n2 4\n");

    std::ostringstream curve;
    analyze::emit_discovery_curve(curve, {{5, 2}, {9, 3}});
    EXPECT_EQ(curve.str(), "# elapsed unique_interfaces\n5 2\n9 3\n");

    std::ostringstream warn;
    analyze::emit_comparison(warn, analyze::snapshot_compare({path(kT, {A})}, {path(kU, {A})}));
    EXPECT_EQ(warn.str(), "# warning: no shared targets\n");

    analyze::GapDiffResult g;
    g.per_target = {{kT, 7}};
    g.cdf = {{7, 1.0}};
    std::ostringstream gap;
    analyze::emit_gap_diff(gap, g);
    EXPECT_EQ(gap.str(),
              "# target ttl_difference\n198.18.0.1 7\n# difference cdf\n7 1\n");
}
