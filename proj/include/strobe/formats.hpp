#pragma once

#include <charconv>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "strobe/ipv4.hpp"
#include "strobe/wire.hpp"

namespace strobe::formats {

// key=value token helpers shared by the line-oriented file formats.

inline std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t'))
            ++i;
        size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t')
            ++j;
        if (j > i)
            out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

inline std::map<std::string, std::string> parse_kv(std::string_view s) {
    std::map<std::string, std::string> kv;
    for (auto tok : split_ws(s)) {
        const auto eq = tok.find('=');
        if (eq == std::string_view::npos)
            continue;
        kv[std::string(tok.substr(0, eq))] = std::string(tok.substr(eq + 1));
    }
    return kv;
}

template <typename T> std::optional<T> parse_int(std::string_view s) {
    T v{};
    const auto* end = s.data() + s.size();
    const auto r = std::from_chars(s.data(), end, v);
    if (r.ec != std::errc{} || r.ptr != end)
        return std::nullopt;
    return v;
}

// Run metadata carried in the response-file header.  Everything needed to
// reproduce or reconstruct the run lives here; records never repeat it.
struct RunMeta {
    std::string key_hex;
    int rounds = 12;
    std::string domain = "list"; // list | slash24 | full4
    uint8_t ttl_min = 1;
    uint8_t ttl_max = 32;
    wire::ProbeMode mode = wire::ProbeMode::tcp_ack;
    std::string units = "ms"; // ms | us
    uint8_t nbrhd_ttl = 0;
    uint64_t eta = 30000; // in units
    uint64_t rate = 1000; // probes/second
    uint32_t shard_v = 0;
    uint32_t shard_n = 1;
    uint64_t run_start = 0; // unix microseconds, informational
    IPv4Addr source;
    uint64_t target_count = 0; // 0 = index-space domain (no list)
};

struct RunSummary {
    uint64_t sent = 0;
    uint64_t skipped_unrouted = 0;
    uint64_t skipped_ttl_range = 0;
    uint64_t skipped_neighborhood = 0;
    uint64_t responses = 0;
    uint64_t undecodable = 0;
};

inline const char* type_token(wire::ResponseType t) {
    switch (t) {
    case wire::ResponseType::ttl_exceeded: return "te";
    case wire::ResponseType::dest_unreachable: return "du";
    case wire::ResponseType::echo_of_target: return "echo";
    case wire::ResponseType::tcp_reply: return "tcp";
    }
    return "?";
}

inline std::optional<wire::ResponseType> parse_type_token(std::string_view s) {
    if (s == "te")
        return wire::ResponseType::ttl_exceeded;
    if (s == "du")
        return wire::ResponseType::dest_unreachable;
    if (s == "echo")
        return wire::ResponseType::echo_of_target;
    if (s == "tcp")
        return wire::ResponseType::tcp_reply;
    return std::nullopt;
}

inline constexpr std::string_view kFieldsLine =
    "#fields target sent_ttl hop rtt recv type reply_ttl quoted_ipid quoted_size reply_size "
    "dscp csum";

// Appends records as they arrive; the footer's presence marks a complete
// run, its absence marks truncation.
class ResponseWriter {
  public:
    ResponseWriter(std::ostream& out, const RunMeta& m) : out_(out) {
        out_ << "#yrp v=1 key=" << m.key_hex << " rounds=" << m.rounds
             << " cipher=rc5-16 domain=" << m.domain << " ttl_min=" << int(m.ttl_min)
             << " ttl_max=" << int(m.ttl_max)
             << " mode=" << (m.mode == wire::ProbeMode::tcp_syn ? "syn" : "ack")
             << " units=" << m.units << " nbrhd=" << int(m.nbrhd_ttl) << " eta=" << m.eta
             << " rate=" << m.rate << " shard=" << m.shard_v << "/" << m.shard_n
             << " start=" << m.run_start << " source=" << m.source.to_string()
             << " targets=" << m.target_count << "\n";
        out_ << kFieldsLine << "\n";
    }

    void write(const wire::ResponseRecord& r) {
        out_ << r.target.to_string() << ' ' << int(r.sent_ttl) << ' ' << r.hop_addr.to_string()
             << ' ';
        if (r.rtt)
            out_ << *r.rtt;
        else
            out_ << '-';
        out_ << ' ' << r.recv_time << ' ' << type_token(r.response_type) << ' '
             << int(r.reply_ttl) << ' ' << r.quoted_ipid << ' ' << r.quoted_size << ' '
             << r.reply_size << ' ' << int(r.dscp) << ' ' << (r.checksum_valid ? 1 : 0) << "\n";
    }

    void finish(const RunSummary& s) {
        out_ << "#end sent=" << s.sent << " unrouted=" << s.skipped_unrouted
             << " ttl_skips=" << s.skipped_ttl_range << " nbrhd_skips=" << s.skipped_neighborhood
             << " responses=" << s.responses << " undecodable=" << s.undecodable << "\n";
        out_.flush();
    }

  private:
    std::ostream& out_;
};

struct ResponseFile {
    RunMeta meta;
    std::vector<wire::ResponseRecord> records;
    std::optional<RunSummary> summary; // absent: run was truncated
    bool complete() const { return summary.has_value(); }
};

namespace detail {
template <typename T>
T require_int(const std::map<std::string, std::string>& kv, const std::string& k, T dflt) {
    const auto it = kv.find(k);
    if (it == kv.end())
        return dflt;
    const auto v = parse_int<T>(it->second);
    if (!v)
        throw std::runtime_error("response header: bad integer for " + k);
    return *v;
}
} // namespace detail

inline RunMeta parse_run_header(std::string_view line) {
    if (!line.starts_with("#yrp "))
        throw std::runtime_error("response file: missing #yrp header");
    const auto kv = parse_kv(line.substr(5));
    RunMeta m;
    if (const auto it = kv.find("key"); it != kv.end())
        m.key_hex = it->second;
    if (const auto it = kv.find("domain"); it != kv.end())
        m.domain = it->second;
    if (const auto it = kv.find("units"); it != kv.end())
        m.units = it->second;
    if (const auto it = kv.find("mode"); it != kv.end())
        m.mode = it->second == "syn" ? wire::ProbeMode::tcp_syn : wire::ProbeMode::tcp_ack;
    if (const auto it = kv.find("source"); it != kv.end()) {
        const auto a = IPv4Addr::parse(it->second);
        if (!a)
            throw std::runtime_error("response header: bad source address");
        m.source = *a;
    }
    if (const auto it = kv.find("shard"); it != kv.end()) {
        const auto s = it->second;
        const auto slash = s.find('/');
        if (slash == std::string::npos)
            throw std::runtime_error("response header: bad shard");
        const auto v = parse_int<uint32_t>(std::string_view(s).substr(0, slash));
        const auto n = parse_int<uint32_t>(std::string_view(s).substr(slash + 1));
        if (!v || !n)
            throw std::runtime_error("response header: bad shard");
        m.shard_v = *v;
        m.shard_n = *n;
    }
    m.rounds = detail::require_int<int>(kv, "rounds", 12);
    m.ttl_min = detail::require_int<uint8_t>(kv, "ttl_min", 1);
    m.ttl_max = detail::require_int<uint8_t>(kv, "ttl_max", 32);
    m.nbrhd_ttl = detail::require_int<uint8_t>(kv, "nbrhd", 0);
    m.eta = detail::require_int<uint64_t>(kv, "eta", 30000);
    m.rate = detail::require_int<uint64_t>(kv, "rate", 1000);
    m.run_start = detail::require_int<uint64_t>(kv, "start", 0);
    m.target_count = detail::require_int<uint64_t>(kv, "targets", 0);
    return m;
}

inline RunSummary parse_run_footer(std::string_view line) {
    const auto kv = parse_kv(line.substr(5));
    RunSummary s;
    s.sent = detail::require_int<uint64_t>(kv, "sent", 0);
    s.skipped_unrouted = detail::require_int<uint64_t>(kv, "unrouted", 0);
    s.skipped_ttl_range = detail::require_int<uint64_t>(kv, "ttl_skips", 0);
    s.skipped_neighborhood = detail::require_int<uint64_t>(kv, "nbrhd_skips", 0);
    s.responses = detail::require_int<uint64_t>(kv, "responses", 0);
    s.undecodable = detail::require_int<uint64_t>(kv, "undecodable", 0);
    return s;
}

inline wire::ResponseRecord parse_record_line(std::string_view line, size_t lineno) {
    const auto f = split_ws(line);
    const auto bad = [&](const char* what) {
        throw std::runtime_error("response file line " + std::to_string(lineno) + ": " + what);
    };
    if (f.size() != 12)
        bad("wrong field count");
    wire::ResponseRecord r;
    const auto target = IPv4Addr::parse(f[0]);
    const auto hop = IPv4Addr::parse(f[2]);
    if (!target || !hop)
        bad("bad address");
    r.target = *target;
    r.hop_addr = *hop;
    const auto sent_ttl = parse_int<uint16_t>(f[1]);
    if (!sent_ttl || *sent_ttl > 255)
        bad("bad sent_ttl");
    r.sent_ttl = uint8_t(*sent_ttl);
    if (f[3] != "-") {
        const auto rtt = parse_int<uint32_t>(f[3]);
        if (!rtt)
            bad("bad rtt");
        r.rtt = *rtt;
    }
    const auto recv = parse_int<uint64_t>(f[4]);
    if (!recv)
        bad("bad recv");
    r.recv_time = *recv;
    const auto type = parse_type_token(f[5]);
    if (!type)
        bad("bad type");
    r.response_type = *type;
    const auto reply_ttl = parse_int<uint16_t>(f[6]);
    const auto quoted_ipid = parse_int<uint16_t>(f[7]);
    const auto quoted_size = parse_int<uint16_t>(f[8]);
    const auto reply_size = parse_int<uint16_t>(f[9]);
    const auto dscp = parse_int<uint16_t>(f[10]);
    const auto csum = parse_int<uint16_t>(f[11]);
    if (!reply_ttl || *reply_ttl > 255 || !quoted_ipid || !quoted_size || !reply_size || !dscp ||
        *dscp > 63 || !csum || *csum > 1)
        bad("bad metadata field");
    r.reply_ttl = uint8_t(*reply_ttl);
    r.quoted_ipid = *quoted_ipid;
    r.quoted_size = *quoted_size;
    r.reply_size = *reply_size;
    r.dscp = uint8_t(*dscp);
    r.checksum_valid = *csum == 1;
    return r;
}

inline ResponseFile read_responses(std::istream& in) {
    ResponseFile file;
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("response file: empty");
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    file.meta = parse_run_header(line);
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        if (line.starts_with("#end")) {
            file.summary = parse_run_footer(line);
            break;
        }
        if (line[0] == '#')
            continue;
        file.records.push_back(parse_record_line(line, lineno));
    }
    return file;
}

} // namespace strobe::formats
