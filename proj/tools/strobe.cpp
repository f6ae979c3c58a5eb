#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "CLI11.hpp"

#include "strobe/analyze.hpp"
#include "strobe/engine.hpp"
#include "strobe/rawnet.hpp"
#include "strobe/recon.hpp"
#include "strobe/routefilter.hpp"
#include "strobe/simnet.hpp"

namespace {

using namespace strobe;

int usage_error(const std::string& msg) {
    std::cerr << "strobe: " << msg << "\n";
    return 2;
}

std::pair<uint32_t, uint32_t> parse_shard(const std::string& s) {
    const auto slash = s.find('/');
    if (slash == std::string::npos)
        throw std::invalid_argument("shard must be V/N");
    const auto v = formats::parse_int<uint32_t>(std::string_view(s).substr(0, slash));
    const auto n = formats::parse_int<uint32_t>(std::string_view(s).substr(slash + 1));
    if (!v || !n || *n == 0 || *v >= *n)
        throw std::invalid_argument("shard must satisfy 0 <= V < N");
    return {*v, *n};
}

std::string random_key_hex() {
    std::random_device rd;
    std::vector<uint8_t> key(16);
    for (auto& b : key)
        b = uint8_t(rd());
    return to_hex(key);
}

permute::CipherKey parse_key(const std::string& hex) {
    const auto bytes = from_hex(hex);
    if (!bytes || bytes->empty() || bytes->size() > 255)
        throw std::invalid_argument("key must be 1-255 bytes of hex");
    return permute::CipherKey{*bytes, 12};
}

std::vector<IPv4Addr> load_target_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open target list " + path);
    std::vector<IPv4Addr> targets;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        std::string_view sv(line);
        while (!sv.empty() && (sv.front() == ' ' || sv.front() == '\t'))
            sv.remove_prefix(1);
        while (!sv.empty() && (sv.back() == ' ' || sv.back() == '\t' || sv.back() == '\r'))
            sv.remove_suffix(1);
        if (sv.empty())
            continue;
        const auto a = IPv4Addr::parse(sv);
        if (!a)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad address");
        targets.push_back(*a);
    }
    return targets;
}

uint64_t unix_micros() {
    return std::chrono::duration_cast<std::chrono::microseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

// Sink selection shared by the read-side subcommands: path or stdout.
class OutputSink {
  public:
    explicit OutputSink(const std::string& path) {
        if (!path.empty() && path != "-") {
            file_.open(path);
            if (!file_)
                throw std::runtime_error("cannot open output " + path);
        }
    }
    std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

  private:
    std::ofstream file_;
};

struct ProbeOpts {
    std::string input;
    std::string output;
    std::string key_hex;
    std::string bgp;
    std::string sim;
    std::string shard = "0/1";
    std::string mode = "ack";
    std::string src;
    bool slash24 = false;
    bool full_v4 = false;
    bool raw = false;
    bool us = false;
    uint64_t rate = 1000;
    uint32_t ttl_min = 1;
    uint32_t ttl_max = 32;
    uint32_t nbrhd = 0;
    double eta = 30.0;
};

int cmd_probe(const ProbeOpts& o) {
    // Flag validation happens in full before any file is touched.
    const int domains = int(!o.input.empty()) + int(o.slash24) + int(o.full_v4);
    if (domains != 1)
        return usage_error("probe: pick exactly one of --input, --slash24, --full-v4");
    if (int(!o.sim.empty()) + int(o.raw) != 1)
        return usage_error("probe: pick exactly one transport, --sim FILE or --raw");
    if (o.ttl_min > o.ttl_max)
        return usage_error("probe: --ttl-min exceeds --ttl-max");
    if (o.output.empty())
        return usage_error("probe: need --output (or STROBE_OUTPUT)");

    uint32_t shard_v = 0, shard_n = 1;
    try {
        std::tie(shard_v, shard_n) = parse_shard(o.shard);
    } catch (const std::invalid_argument& e) {
        return usage_error(std::string("probe: ") + e.what());
    }

    const std::string key_hex = o.key_hex.empty() ? random_key_hex() : o.key_hex;
    permute::CipherKey key;
    try {
        key = parse_key(key_hex);
    } catch (const std::invalid_argument& e) {
        return usage_error(std::string("probe: ") + e.what());
    }

    const uint32_t ups = o.us ? 1'000'000u : 1000u;
    if (o.input.empty()) {
        // Index-space domains have a known size, so the stamp-capacity
        // check needs no I/O.
        const uint64_t size = uint64_t(1) << 32;
        const uint64_t lo = uint64_t((unsigned __int128)size * shard_v / shard_n);
        const uint64_t hi = uint64_t((unsigned __int128)size * (shard_v + 1) / shard_n);
        try {
            engine::check_stamp_capacity(hi - lo, o.rate, ups);
        } catch (const std::invalid_argument& e) {
            return usage_error(std::string("probe: ") + e.what());
        }
    }

    std::optional<IPv4Addr> src;
    if (!o.src.empty()) {
        src = IPv4Addr::parse(o.src);
        if (!src)
            return usage_error("probe: bad --src address");
    }

    try {
        const auto ttl_min = uint8_t(o.ttl_min), ttl_max = uint8_t(o.ttl_max);
        permute::ProbeDomain domain;
        formats::RunMeta meta;
        if (!o.input.empty()) {
            auto targets = load_target_file(o.input);
            meta.domain = "list";
            meta.target_count = targets.size();
            domain = permute::ProbeDomain::from_targets(std::move(targets), ttl_min, ttl_max);
        } else if (o.slash24) {
            meta.domain = "slash24";
            domain = permute::ProbeDomain::slash24(ttl_min, ttl_max);
        } else {
            meta.domain = "full4";
            domain = permute::ProbeDomain::full_v4(ttl_min, ttl_max);
        }

        std::optional<routefilter::RoutingTrie> trie;
        if (!o.bgp.empty()) {
            std::ifstream in(o.bgp);
            if (!in)
                throw std::runtime_error("cannot open prefix file " + o.bgp);
            trie.emplace(routefilter::load_prefixes(in));
        }

        engine::RunConfig cfg;
        cfg.domain = domain;
        cfg.key = key;
        cfg.rate = o.rate;
        cfg.mode = o.mode == "syn" ? wire::ProbeMode::tcp_syn : wire::ProbeMode::tcp_ack;
        cfg.nbrhd_ttl = uint8_t(o.nbrhd);
        cfg.eta_units = uint64_t(o.eta * ups);
        cfg.filter = trie ? &*trie : nullptr;
        cfg.shard_v = shard_v;
        cfg.shard_n = shard_n;
        cfg.units_per_sec = ups;

        meta.key_hex = key_hex;
        meta.rounds = key.rounds;
        meta.ttl_min = ttl_min;
        meta.ttl_max = ttl_max;
        meta.mode = cfg.mode;
        meta.units = o.us ? "us" : "ms";
        meta.nbrhd_ttl = cfg.nbrhd_ttl;
        meta.eta = cfg.eta_units;
        meta.rate = cfg.rate;
        meta.shard_v = shard_v;
        meta.shard_n = shard_n;
        meta.run_start = unix_micros();

        std::unique_ptr<Transport> transport;
        if (!o.sim.empty()) {
            std::ifstream in(o.sim);
            if (!in)
                throw std::runtime_error("cannot open topology " + o.sim);
            auto topo = simnet::SimTopology::from_stream(in);
            transport = std::make_unique<simnet::SimTransport>(std::move(topo), ups);
            cfg.source = src.value_or(simnet::kDefaultSource);
            cfg.virtual_stamps = true;
        } else {
            rawnet::RawTransport::Config rc;
            rc.source = src;
            auto rt = std::make_unique<rawnet::RawTransport>(rc, ups);
            cfg.source = rt->source();
            transport = std::move(rt);
        }
        meta.source = cfg.source;

        std::ofstream out(o.output);
        if (!out)
            throw std::runtime_error("cannot open output " + o.output);
        formats::ResponseWriter writer(out, meta);
        const auto res = engine::run(cfg, *transport, writer);

        std::cout << "sent=" << res.summary.sent << " unrouted=" << res.summary.skipped_unrouted
                  << " ttl_skips=" << res.summary.skipped_ttl_range
                  << " nbrhd_skips=" << res.summary.skipped_neighborhood
                  << " responses=" << res.summary.responses
                  << " undecodable=" << res.summary.undecodable << " output=" << o.output << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "strobe: probe: " << e.what() << "\n";
        return 1;
    }
}

struct ReconOpts {
    std::string input;
    std::string output;
};

int cmd_reconstruct(const ReconOpts& o) {
    try {
        std::ifstream in(o.input);
        if (!in)
            throw std::runtime_error("cannot open " + o.input);
        const auto file = formats::read_responses(in);
        if (!file.complete())
            std::cerr << "strobe: reconstruct: input has no footer, reconstructing a "
                         "truncated run\n";
        const auto res = recon::reconstruct(file);
        for (const auto& w : res.stats.warnings)
            std::cerr << "strobe: reconstruct: " << w << "\n";
        recon::PathFileMeta meta{file.meta.units, file.meta.ttl_min, file.meta.ttl_max,
                                 file.meta.nbrhd_ttl};
        OutputSink sink(o.output);
        recon::write_paths(sink.stream(), meta, res.paths);
        std::cerr << "targets=" << res.paths.size() << " duplicates=" << res.stats.duplicates
                  << " quarantined=" << res.stats.quarantined << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "strobe: reconstruct: " << e.what() << "\n";
        return 1;
    }
}

struct CompareOpts {
    std::string first;
    std::string second;
    std::string output;
    uint32_t cutoff = 0;
};

recon::PathFile read_path_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    return recon::read_paths(in);
}

int cmd_compare(const CompareOpts& o) {
    try {
        const auto a = read_path_file(o.first);
        const auto b = read_path_file(o.second);
        const auto cmp = analyze::snapshot_compare(a.paths, b.paths, uint8_t(o.cutoff));
        if (cmp.empty_intersection)
            std::cerr << "strobe: compare: no shared targets\n";
        OutputSink sink(o.output);
        analyze::emit_comparison(sink.stream(), cmp);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "strobe: compare: " << e.what() << "\n";
        return 1;
    }
}

struct StatsOpts {
    std::string degree;
    std::string curve;
    std::vector<std::string> gap_limit;
    std::string output;
    uint32_t gap = 5;
};

int cmd_stats(const StatsOpts& o) {
    if (o.degree.empty() && o.curve.empty() && o.gap_limit.empty())
        return usage_error("stats: pick at least one of --degree, --curve, --gap-limit");
    try {
        OutputSink sink(o.output);
        auto& out = sink.stream();
        if (!o.degree.empty()) {
            const auto paths = read_path_file(o.degree);
            const auto g = analyze::build_graph(paths.paths);
            out << "# nodes " << g.nodes.size() << " edges " << g.edges.size() << "\n";
            analyze::emit_degree_histogram(out, analyze::degree_distribution(g));
        }
        if (!o.curve.empty()) {
            std::ifstream in(o.curve);
            if (!in)
                throw std::runtime_error("cannot open " + o.curve);
            const auto file = formats::read_responses(in);
            analyze::emit_discovery_curve(out, analyze::discovery_curve(file));
        }
        if (!o.gap_limit.empty()) {
            const auto a = read_path_file(o.gap_limit[0]);
            const auto b = read_path_file(o.gap_limit[1]);
            analyze::emit_gap_diff(out, analyze::gap_limit_diff(a.paths, b.paths, o.gap));
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "strobe: stats: " << e.what() << "\n";
        return 1;
    }
}

struct GentopoOpts {
    std::string output;
    std::string truth;
    uint32_t dests = 1000;
    uint32_t depth = 20;
    double balancers = 0.0;
    uint64_t seed = 1;
    uint32_t budget = 0;
    uint32_t hop_delay = 1;
    uint32_t jitter = 0;
    uint32_t quote = 28;
};

int cmd_gentopo(const GentopoOpts& o) {
    try {
        simnet::TopoSpec spec;
        spec.destinations = o.dests;
        spec.max_depth = o.depth;
        spec.balancer_density = o.balancers;
        spec.seed = o.seed;
        spec.router_budget = o.budget;
        auto topo = simnet::generate_topology(spec);
        topo.hop_delay_ms = o.hop_delay;
        topo.jitter_ms = o.jitter;
        topo.quote_bytes = o.quote;
        {
            OutputSink sink(o.output);
            topo.to_stream(sink.stream());
        }
        if (!o.truth.empty()) {
            std::ofstream out(o.truth);
            if (!out)
                throw std::runtime_error("cannot open " + o.truth);
            out << "# truth v=1 source=" << simnet::kDefaultSource.to_string() << "\n";
            for (const auto& d : topo.dests()) {
                out << d.addr.to_string();
                for (const auto hop : topo.ground_truth(simnet::kDefaultSource, d.addr))
                    out << ' ' << hop.to_string();
                out << "\n";
            }
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "strobe: gentopo: " << e.what() << "\n";
        return 1;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"strobe: stateless randomized high-speed traceroute"};
    app.require_subcommand(1);

    ProbeOpts po;
    auto* probe = app.add_subcommand("probe", "Probe a target domain and record responses");
    probe->add_option("--input,--targets", po.input,
                      "Target list file, one dotted quad per line");
    probe->add_flag("--slash24", po.slash24, "Sweep one host per /24 across IPv4");
    probe->add_flag("--full-v4", po.full_v4, "Sweep every IPv4 address");
    probe->add_option("--sim", po.sim, "Probe a simulated topology file");
    probe->add_flag("--raw", po.raw, "Probe the real network (needs raw sockets)");
    probe->add_option("--output,-o", po.output, "Response file path")->envname("STROBE_OUTPUT");
    probe->add_option("--key", po.key_hex, "Permutation key in hex (random if absent)")
        ->envname("STROBE_KEY");
    probe->add_option("--rate", po.rate, "Probes per second")->check(CLI::PositiveNumber);
    probe->add_option("--ttl-min", po.ttl_min, "Lowest TTL")->check(CLI::Range(1, 255));
    probe->add_option("--ttl-max", po.ttl_max, "Highest TTL")->check(CLI::Range(1, 255));
    probe->add_option("--nbrhd", po.nbrhd, "Neighborhood TTL bound (0 disables)")
        ->check(CLI::Range(0, 255));
    probe->add_option("--eta", po.eta, "Discovery window in seconds")
        ->check(CLI::PositiveNumber);
    probe->add_option("--mode", po.mode, "TCP probe flavor")
        ->check(CLI::IsMember({"ack", "syn"}));
    probe->add_option("--bgp", po.bgp, "Prefix filter file (absent probes everything)");
    probe->add_option("--shard", po.shard, "V/N split of the permuted domain");
    probe->add_flag("--us", po.us, "Microsecond timestamps");
    probe->add_option("--src", po.src, "Source address override");

    ReconOpts ro;
    auto* rec = app.add_subcommand("reconstruct", "Turn a response file into per-target paths");
    rec->add_option("--input,-i", ro.input, "Response file")->required();
    rec->add_option("--output,-o", ro.output, "Path file (default stdout)");

    CompareOpts co;
    auto* cmp = app.add_subcommand("compare", "Diff two path snapshots");
    cmp->add_option("first", co.first, "First path file")->required();
    cmp->add_option("second", co.second, "Second path file")->required();
    cmp->add_option("--cutoff", co.cutoff, "Ignore hops at or below this TTL")
        ->check(CLI::Range(0, 255));
    cmp->add_option("--output,-o", co.output, "Report destination (default stdout)");

    StatsOpts so;
    auto* st = app.add_subcommand("stats", "Interface graph, discovery, and gap statistics");
    st->add_option("--degree", so.degree, "Degree histogram of a path file");
    st->add_option("--curve", so.curve, "Discovery curve of a response file");
    st->add_option("--gap-limit", so.gap_limit, "Gap-limit diff of two path files")
        ->expected(2);
    st->add_option("--gap", so.gap, "Consecutive-anonymous gap that stops a trace")
        ->check(CLI::PositiveNumber);
    st->add_option("--output,-o", so.output, "Report destination (default stdout)");

    GentopoOpts go;
    auto* gt = app.add_subcommand("gentopo", "Generate a simulated topology");
    gt->add_option("--dests", go.dests, "Destination count")->check(CLI::PositiveNumber);
    gt->add_option("--depth", go.depth, "Maximum path depth")->check(CLI::Range(1, 64));
    gt->add_option("--balancers", go.balancers, "Fraction of eligible routers diamondized")
        ->check(CLI::Range(0.0, 1.0));
    gt->add_option("--seed", go.seed, "Generator seed");
    gt->add_option("--budget", go.budget, "Router budget (0 derives from --dests)");
    gt->add_option("--hop-delay", go.hop_delay, "Per-hop delay in ms");
    gt->add_option("--jitter", go.jitter, "Reply jitter bound in ms");
    gt->add_option("--quote", go.quote, "Quoted octets in ICMP errors")
        ->check(CLI::Range(28, 128));
    gt->add_option("--output,-o", go.output, "Topology file (default stdout)");
    gt->add_option("--truth", go.truth, "Also dump ground-truth paths here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (probe->parsed())
        return cmd_probe(po);
    if (rec->parsed())
        return cmd_reconstruct(ro);
    if (cmp->parsed())
        return cmd_compare(co);
    if (st->parsed())
        return cmd_stats(so);
    if (gt->parsed())
        return cmd_gentopo(go);
    return usage_error("no subcommand");
}
