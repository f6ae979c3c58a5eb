#include <gtest/gtest.h>

#include <cstdint>
#include <sstream>

#include "strobe/formats.hpp"

using namespace strobe;
using namespace strobe::formats;

namespace {

RunMeta sample_meta() {
    RunMeta m;
    m.key_hex = "cafebabe";
    m.domain = "list";
    m.ttl_min = 2;
    m.ttl_max = 24;
    m.mode = wire::ProbeMode::tcp_syn;
    m.units = "us";
    m.nbrhd_ttl = 4;
    m.eta = 1500;
    m.rate = 777;
    m.shard_v = 2;
    m.shard_n = 5;
    m.run_start = 1234567890;
    m.source = IPv4Addr(10, 9, 8, 7);
    m.target_count = 42;
    return m;
}

wire::ResponseRecord sample_record() {
    wire::ResponseRecord r;
    r.target = IPv4Addr(198, 51, 100, 7);
    r.sent_ttl = 9;
    r.hop_addr = IPv4Addr(10, 1, 2, 3);
    r.rtt = 17;
    r.recv_time = 44321;
    r.response_type = wire::ResponseType::ttl_exceeded;
    r.reply_ttl = 57;
    r.quoted_ipid = 9;
    r.quoted_size = 28;
    r.reply_size = 56;
    r.dscp = 12;
    r.checksum_valid = true;
    return r;
}

TEST(Formats, HeaderRoundTrip) {
    std::ostringstream out;
    ResponseWriter w(out, sample_meta());
    w.finish(RunSummary{});
    std::istringstream in(out.str());
    const auto file = read_responses(in);
    const auto& m = file.meta;
    EXPECT_EQ(m.key_hex, "cafebabe");
    EXPECT_EQ(m.domain, "list");
    EXPECT_EQ(m.ttl_min, 2);
    EXPECT_EQ(m.ttl_max, 24);
    EXPECT_EQ(m.mode, wire::ProbeMode::tcp_syn);
    EXPECT_EQ(m.units, "us");
    EXPECT_EQ(m.nbrhd_ttl, 4);
    EXPECT_EQ(m.eta, 1500u);
    EXPECT_EQ(m.rate, 777u);
    EXPECT_EQ(m.shard_v, 2u);
    EXPECT_EQ(m.shard_n, 5u);
    EXPECT_EQ(m.run_start, 1234567890u);
    EXPECT_EQ(m.source, IPv4Addr(10, 9, 8, 7));
    EXPECT_EQ(m.target_count, 42u);
    EXPECT_TRUE(file.complete());
}

TEST(Formats, RecordRoundTrip) {
    std::ostringstream out;
    ResponseWriter w(out, sample_meta());
    auto r1 = sample_record();
    auto r2 = sample_record();
    r2.rtt.reset();
    r2.response_type = wire::ResponseType::tcp_reply;
    r2.sent_ttl = 0;
    r2.checksum_valid = false;
    auto r3 = sample_record();
    r3.response_type = wire::ResponseType::dest_unreachable;
    auto r4 = sample_record();
    r4.response_type = wire::ResponseType::echo_of_target;
    w.write(r1);
    w.write(r2);
    w.write(r3);
    w.write(r4);
    RunSummary s;
    s.sent = 100;
    s.skipped_unrouted = 5;
    s.skipped_ttl_range = 7;
    s.skipped_neighborhood = 11;
    s.responses = 4;
    s.undecodable = 2;
    w.finish(s);

    std::istringstream in(out.str());
    const auto file = read_responses(in);
    ASSERT_EQ(file.records.size(), 4u);
    const auto& g = file.records[0];
    EXPECT_EQ(g.target, r1.target);
    EXPECT_EQ(g.sent_ttl, r1.sent_ttl);
    EXPECT_EQ(g.hop_addr, r1.hop_addr);
    EXPECT_EQ(g.rtt, r1.rtt);
    EXPECT_EQ(g.recv_time, r1.recv_time);
    EXPECT_EQ(g.response_type, r1.response_type);
    EXPECT_EQ(g.reply_ttl, r1.reply_ttl);
    EXPECT_EQ(g.quoted_ipid, r1.quoted_ipid);
    EXPECT_EQ(g.quoted_size, r1.quoted_size);
    EXPECT_EQ(g.reply_size, r1.reply_size);
    EXPECT_EQ(g.dscp, r1.dscp);
    EXPECT_TRUE(g.checksum_valid);
    EXPECT_FALSE(file.records[1].rtt.has_value());
    EXPECT_EQ(file.records[1].response_type, wire::ResponseType::tcp_reply);
    EXPECT_FALSE(file.records[1].checksum_valid);
    EXPECT_EQ(file.records[2].response_type, wire::ResponseType::dest_unreachable);
    EXPECT_EQ(file.records[3].response_type, wire::ResponseType::echo_of_target);

    ASSERT_TRUE(file.summary);
    EXPECT_EQ(file.summary->sent, 100u);
    EXPECT_EQ(file.summary->skipped_unrouted, 5u);
    EXPECT_EQ(file.summary->skipped_ttl_range, 7u);
    EXPECT_EQ(file.summary->skipped_neighborhood, 11u);
    EXPECT_EQ(file.summary->responses, 4u);
    EXPECT_EQ(file.summary->undecodable, 2u);
}

TEST(Formats, TruncatedFileHasNoSummary) {
    std::ostringstream out;
    ResponseWriter w(out, sample_meta());
    w.write(sample_record());
    // No finish(): the process died mid-run.
    std::istringstream in(out.str());
    const auto file = read_responses(in);
    EXPECT_FALSE(file.complete());
    EXPECT_EQ(file.records.size(), 1u);
}

TEST(Formats, MissingHeaderIsAnError) {
    std::istringstream in("not a header\n");
    EXPECT_THROW(read_responses(in), std::runtime_error);
    std::istringstream empty("");
    EXPECT_THROW(read_responses(empty), std::runtime_error);
}

TEST(Formats, BadRecordReportsLineNumber) {
    std::ostringstream out;
    ResponseWriter w(out, sample_meta());
    w.write(sample_record());
    std::string text = out.str();
    text += "1.2.3.4 5 6.7.8.9 bogus 100 te 64 5 28 56 0 1\n";
    std::istringstream in(text);
    try {
        read_responses(in);
        FAIL() << "expected a parse error";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
    }
}

TEST(Formats, FieldCountIsEnforced) {
    EXPECT_THROW(parse_record_line("1.2.3.4 5 6.7.8.9 - 100 te 64 5 28 56 0", 9),
                 std::runtime_error);
    EXPECT_THROW(parse_record_line("", 9), std::runtime_error);
    EXPECT_NO_THROW(parse_record_line("1.2.3.4 5 6.7.8.9 - 100 te 64 5 28 56 0 1", 9));
}

TEST(Formats, TypeTokens) {
    EXPECT_EQ(type_token(wire::ResponseType::ttl_exceeded), std::string("te"));
    EXPECT_EQ(type_token(wire::ResponseType::dest_unreachable), std::string("du"));
    EXPECT_EQ(type_token(wire::ResponseType::echo_of_target), std::string("echo"));
    EXPECT_EQ(type_token(wire::ResponseType::tcp_reply), std::string("tcp"));
    EXPECT_EQ(parse_type_token("te"), wire::ResponseType::ttl_exceeded);
    EXPECT_EQ(parse_type_token("nope"), std::nullopt);
}

TEST(Formats, ParseHelpers) {
    EXPECT_EQ(parse_int<uint32_t>("123"), 123u);
    EXPECT_EQ(parse_int<uint32_t>(""), std::nullopt);
    EXPECT_EQ(parse_int<uint32_t>("12x"), std::nullopt);
    EXPECT_EQ(parse_int<uint8_t>("255"), 255);
    EXPECT_EQ(parse_int<uint8_t>("256"), std::nullopt);
    EXPECT_EQ(parse_int<uint32_t>("-1"), std::nullopt);

    const auto kv = parse_kv("a=1 b=two  c=3/4");
    EXPECT_EQ(kv.at("a"), "1");
    EXPECT_EQ(kv.at("b"), "two");
    EXPECT_EQ(kv.at("c"), "3/4");

    const auto f = split_ws("  one   two\tthree ");
    ASSERT_EQ(f.size(), 3u);
    EXPECT_EQ(f[0], "one");
    EXPECT_EQ(f[2], "three");
}

TEST(Formats, CommentLinesAreSkippedOnRead) {
    std::ostringstream out;
    ResponseWriter w(out, sample_meta());
    w.write(sample_record());
    w.finish(RunSummary{});
    std::string text = out.str();
    // The fields line is a comment; an extra one mid-file must not break parsing.
    const auto pos = text.rfind("#end");
    text.insert(pos, "# a stray comment\n");
    std::istringstream in(text);
    EXPECT_EQ(read_responses(in).records.size(), 1u);
}

} // namespace
