#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <thread>
#include <unordered_set>
#include <variant>
#include <vector>

#include "strobe/formats.hpp"
#include "strobe/ipv4.hpp"
#include "strobe/permute.hpp"
#include "strobe/routefilter.hpp"
#include "strobe/transport.hpp"
#include "strobe/wire.hpp"

namespace strobe::engine {

struct RunConfig {
    permute::ProbeDomain domain;
    permute::CipherKey key;
    uint64_t rate = 1000; // probes/second
    wire::ProbeMode mode = wire::ProbeMode::tcp_ack;
    uint8_t nbrhd_ttl = 0;        // 0 disables the neighborhood optimization
    uint64_t eta_units = 30'000;  // discovery window, in time units
    const routefilter::RoutingTrie* filter = nullptr;
    uint32_t shard_v = 0;
    uint32_t shard_n = 1;
    uint32_t units_per_sec = 1000; // 1000 = ms, 1'000'000 = us
    IPv4Addr source;
    uint8_t dscp = 0;
    // Simulated runs stamp probes with the deterministic send schedule
    // instead of the wall clock, making outputs byte-reproducible.
    bool virtual_stamps = false;
    uint64_t table_threshold = permute::PermutedDomain::kDefaultTableThreshold;

    void validate() const {
        domain.validate();
        if (rate == 0)
            throw std::invalid_argument("run config: rate must be positive");
        if (shard_n == 0 || shard_v >= shard_n)
            throw std::invalid_argument("run config: need 0 <= shard_v < shard_n");
        if (nbrhd_ttl > domain.ttl_max)
            throw std::invalid_argument("run config: nbrhd_ttl above ttl_max");
        if (units_per_sec != 1000 && units_per_sec != 1'000'000)
            throw std::invalid_argument("run config: units must be ms or us");
    }
};

// The elapsed stamp must fit 32 bits, so a probing plan may not outlast
// 2^32 time units at the configured rate.
inline void check_stamp_capacity(uint64_t probes, uint64_t rate, uint32_t units_per_sec) {
    if (probes == 0)
        return;
    const unsigned __int128 last = (unsigned __int128)(probes - 1) * units_per_sec / rate;
    if (last > 0xFFFFFFFFu)
        throw std::invalid_argument(
            "run config: domain too large for the 32-bit elapsed stamp at this rate; "
            "raise --rate, shard the run, or drop microsecond units");
}

// Token bucket: long-run rate within tolerance of the target, bursts
// bounded by one millisecond of tokens.
class Pacer {
  public:
    explicit Pacer(uint64_t rate_per_sec)
        : rate_(double(rate_per_sec)), cap_(std::max(1.0, double(rate_per_sec) / 1000.0)),
          tokens_(cap_), last_(std::chrono::steady_clock::now()) {}

    template <typename Idle> void acquire(Idle&& idle) {
        using std::chrono::duration;
        using std::chrono::steady_clock;
        for (;;) {
            const auto now = steady_clock::now();
            tokens_ = std::min(cap_, tokens_ + duration<double>(now - last_).count() * rate_);
            last_ = now;
            if (tokens_ >= 1.0) {
                tokens_ -= 1.0;
                return;
            }
            idle();
            const double need_s = (1.0 - tokens_) / rate_;
            if (need_s > 250e-6)
                std::this_thread::sleep_for(duration<double>(need_s - 150e-6));
            // below that, spin through the clock for precision
        }
    }

  private:
    double rate_;
    double cap_;
    double tokens_;
    std::chrono::steady_clock::time_point last_;
};

// Per-depth discovery tracking for TTLs 1..nbrhd_ttl.  A depth's window
// opens at its first probe; once the time since the last new interface
// exceeds eta, that depth is skipped for the rest of the run.
class NeighborhoodState {
  public:
    NeighborhoodState(uint8_t nbrhd_ttl, uint64_t eta_units)
        : eta_(eta_units), depths_(size_t(nbrhd_ttl) + 1) {}

    bool enabled() const { return depths_.size() > 1; }
    bool covers(uint8_t ttl) const { return ttl >= 1 && ttl < depths_.size(); }

    // Send-side check; latches skipping permanently once the window lapses.
    bool should_skip(uint8_t ttl, uint64_t now) {
        Depth& d = depths_[ttl];
        if (d.skipping)
            return true;
        if (!d.window_open)
            return false;
        if (now - d.last_new_interface > eta_) {
            d.skipping = true;
            return true;
        }
        return false;
    }

    void on_probe_sent(uint8_t ttl, uint64_t now) {
        Depth& d = depths_[ttl];
        if (!d.window_open) {
            d.window_open = true;
            d.last_new_interface = now;
        }
        d.last_probe_sent = now;
    }

    void on_response(const wire::ResponseRecord& r, uint64_t now) {
        if (!covers(r.sent_ttl))
            return;
        Depth& d = depths_[r.sent_ttl];
        if (d.seen.insert(r.hop_addr.value()).second)
            d.last_new_interface = now;
    }

    bool skipping(uint8_t ttl) const { return covers(ttl) && depths_[ttl].skipping; }

    size_t live_entries() const {
        size_t n = 0;
        for (const auto& d : depths_)
            n += d.seen.size();
        return n;
    }

  private:
    struct Depth {
        std::unordered_set<uint32_t> seen;
        uint64_t last_probe_sent = 0;
        uint64_t last_new_interface = 0;
        bool window_open = false;
        bool skipping = false;
    };
    uint64_t eta_;
    std::vector<Depth> depths_; // index by ttl; [0] unused
};

struct RunResult {
    formats::RunSummary summary;
    std::array<uint64_t, 256> sent_by_ttl{};
    size_t nbrhd_live_entries = 0;
};

// The probing loop: iterate the shard of the permuted domain, filter,
// pace, transmit, and stream every decoded reply to the writer in arrival
// order.  No per-probe state is kept; replies match themselves via their
// quoted stamps.
inline RunResult run(const RunConfig& cfg, Transport& transport, formats::ResponseWriter& out) {
    cfg.validate();
    permute::PermutedDomain pd(cfg.domain, cfg.key, cfg.table_threshold);
    const auto [lo, hi] = pd.shard_range(cfg.shard_v, cfg.shard_n);
    check_stamp_capacity(hi - lo, cfg.rate, cfg.units_per_sec);

    NeighborhoodState nbrhd(cfg.nbrhd_ttl, cfg.eta_units);
    Pacer pacer(cfg.rate);
    RunResult res;
    uint64_t sent = 0;
    const auto start = std::chrono::steady_clock::now();

    const auto sched = [&](uint64_t n) { return n * cfg.units_per_sec / cfg.rate; };
    const auto real_units = [&] {
        const std::chrono::duration<double> d = std::chrono::steady_clock::now() - start;
        return uint64_t(d.count() * cfg.units_per_sec);
    };
    const auto now_units = [&] { return cfg.virtual_stamps ? sched(sent) : real_units(); };

    const auto handle = [&](const RawReply& rep) {
        const auto outcome = wire::parse_reply(rep.packet, rep.recv_elapsed, 0, cfg.mode);
        if (const auto* rec = std::get_if<wire::ResponseRecord>(&outcome)) {
            out.write(*rec);
            ++res.summary.responses;
            nbrhd.on_response(*rec, rec->recv_time);
        } else if (std::get<wire::DecodeDrop>(outcome) == wire::DecodeDrop::undecodable) {
            ++res.summary.undecodable;
        }
    };
    const auto drain_ready = [&] {
        const uint64_t now = now_units();
        while (auto rep = transport.poll(now))
            handle(*rep);
    };

    for (uint64_t i = lo; i < hi; ++i) {
        const auto a = pd.decode(pd.permute_index(i));
        if (a.ttl < cfg.domain.ttl_min || a.ttl > cfg.domain.ttl_max) {
            ++res.summary.skipped_ttl_range;
            continue;
        }
        if (cfg.filter && !cfg.filter->is_routed(a.target)) {
            ++res.summary.skipped_unrouted;
            continue;
        }
        if (nbrhd.enabled() && nbrhd.covers(a.ttl) && nbrhd.should_skip(a.ttl, now_units())) {
            ++res.summary.skipped_neighborhood;
            continue;
        }
        pacer.acquire(drain_ready);
        const uint64_t stamp = now_units();
        if (stamp > 0xFFFFFFFFu)
            throw std::runtime_error("elapsed stamp overflowed 32 bits mid-run");
        const wire::ProbeDescriptor d{a.target, a.ttl, uint32_t(stamp), cfg.mode, cfg.dscp};
        const auto pkt = wire::build_packet(d, cfg.source);
        transport.send(pkt, a.target);
        if (nbrhd.covers(a.ttl))
            nbrhd.on_probe_sent(a.ttl, stamp);
        ++res.sent_by_ttl[a.ttl];
        ++res.summary.sent;
        ++sent;
        drain_ready();
    }
    while (auto rep = transport.wait_remaining())
        handle(*rep);

    res.nbrhd_live_entries = nbrhd.live_entries();
    out.finish(res.summary);
    return res;
}

} // namespace strobe::engine
