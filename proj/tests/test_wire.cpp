#include "doctest.h"

#include "okmp/wire.hpp"
#include "test_util.hpp"

#include <filesystem>
#include <fstream>
#include <unistd.h>

using namespace okmp;
using namespace okmp::wire;
using okmp::test_support::expect_code;

namespace {

std::vector<std::uint64_t> random_coords(std::size_t n, const PrimeField& f, RandomSource& rng) {
    std::vector<std::uint64_t> v(n);
    for (auto& x : v) {
        x = f.rand(rng).value();
    }
    return v;
}

std::string random_text(RandomSource& rng) {
    std::string s(rng.uniform_below(20), '\0');
    for (auto& c : s) {
        c = static_cast<char>(rng.uniform_below(256));
    }
    return s;
}

Frame random_frame(const PrimeField& f, RandomSource& rng) {
    const auto kind = static_cast<FrameKind>(1 + rng.uniform_below(7));
    const std::uint64_t epoch = rng.next_u64();
    const auto dim = static_cast<std::uint32_t>(rng.uniform_below(17));
    switch (kind) {
    case FrameKind::Rekey:
    case FrameKind::AuthChallenge:
    case FrameKind::AuthResponse:
        return Frame{kind, epoch, dim, VectorBody{random_coords(dim, f, rng)}};
    case FrameKind::KeyIssue: {
        KeyIssueBody b{static_cast<std::uint32_t>(rng.next_u64()), random_coords(dim, f, rng),
                       f.rand(rng).value(), std::nullopt};
        if (rng.uniform_below(2)) {
            b.aggregate = random_coords(dim, f, rng);
        }
        return Frame{kind, epoch, dim, std::move(b)};
    }
    case FrameKind::JoinRequest:
        return Frame{kind, epoch, 0, JoinRequestBody{random_text(rng), random_text(rng)}};
    case FrameKind::LeaveNotice:
        return Frame{kind, epoch, 0, LeaveNoticeBody{random_text(rng)}};
    case FrameKind::Error:
        return Frame{kind, epoch, 0,
                     ErrorBody{static_cast<ErrorCode>(rng.uniform_below(30)), random_text(rng)}};
    }
    return {};
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() /
           ("okmp-" + std::to_string(::getpid()) + "-" + name);
}

} // namespace

TEST_CASE("REKEY layout is byte exact") {
    const PrimeField f;
    const RekeyMessage msg{0x0102030405060708ULL, FVector::from_signed(f, {1, 5})};
    const Bytes bytes = encode_frame(rekey_frame(msg));
    REQUIRE(bytes.size() == kHeaderBytes + 16);
    const unsigned char expected[] = {'O', 'K', 'M', 'P', 1, 1, 8, 7, 6, 5, 4, 3, 2, 1, 2, 0, 0, 0,
                                      1,   0,   0,   0,   0, 0, 0, 0, 5, 0, 0, 0, 0, 0, 0, 0};
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        CAPTURE(i);
        CHECK(std::to_integer<unsigned>(bytes[i]) == expected[i]);
    }
    CHECK(to_rekey(decode_frame(bytes, f), f) == msg);
}

TEST_CASE("randomized round trips for every kind") {
    const PrimeField f;
    SeededRandom rng(1);
    for (int i = 0; i < 10000; ++i) {
        const Frame frame = random_frame(f, rng);
        const Bytes bytes = encode_frame(frame);
        REQUIRE(decode_frame(bytes, f) == frame);
        REQUIRE(encode_frame(decode_frame(bytes, f)) == bytes);
    }
}

TEST_CASE("truncation and garbage produce typed errors") {
    const PrimeField f;
    SeededRandom rng(2);
    for (int i = 0; i < 2000; ++i) {
        const Bytes bytes = encode_frame(random_frame(f, rng));
        const auto cut = rng.uniform_below(bytes.size());
        try {
            decode_frame(std::span(bytes).first(cut), f);
            FAIL("prefix decoded");
        } catch (const Error& e) {
            REQUIRE((e.code() == ErrorCode::TruncatedFrame || e.code() == ErrorCode::BadMagic ||
                     e.code() == ErrorCode::LengthMismatch));
        }
        Bytes mutated = bytes;
        for (int k = 0; k < 3; ++k) {
            mutated[rng.uniform_below(mutated.size())] = std::byte{static_cast<unsigned char>(rng.next_u64())};
        }
        try {
            const Frame back = decode_frame(mutated, f);
            REQUIRE(encode_frame(back) == mutated);
        } catch (const Error&) {
        }
        Bytes noise(rng.uniform_below(64));
        for (auto& b : noise) {
            b = std::byte{static_cast<unsigned char>(rng.next_u64())};
        }
        try {
            decode_frame(noise, f);
        } catch (const Error&) {
        }
    }
}

TEST_CASE("last byte missing is a truncated frame") {
    const PrimeField f;
    const Bytes bytes = encode_frame(rekey_frame({3, FVector::from_signed(f, {1, 5})}));
    expect_code(ErrorCode::TruncatedFrame, [&] { decode_frame(std::span(bytes).first(bytes.size() - 1), f); });
}

TEST_CASE("header validation") {
    const PrimeField f;
    const Bytes good = encode_frame(rekey_frame({1, FVector::from_signed(f, {1, 2, 3})}));
    Bytes b = good;
    b[0] = std::byte{'X'};
    expect_code(ErrorCode::BadMagic, [&] { decode_frame(b, f); });
    b = good;
    b[4] = std::byte{9};
    expect_code(ErrorCode::BadVersion, [&] { decode_frame(b, f); });
    b = good;
    b[5] = std::byte{0};
    expect_code(ErrorCode::BadKind, [&] { decode_frame(b, f); });
    b = good;
    b[5] = std::byte{8};
    expect_code(ErrorCode::BadKind, [&] { decode_frame(b, f); });
    b = good;
    b.push_back(std::byte{0});
    expect_code(ErrorCode::LengthMismatch, [&] { decode_frame(b, f); });
    b = good;
    store_le64(f.modulus(), b.data() + kHeaderBytes);
    expect_code(ErrorCode::NonCanonical, [&] { decode_frame(b, f); });
    b = good;
    b[14] = std::byte{0xff};
    b[17] = std::byte{0xff};
    expect_code(ErrorCode::TruncatedFrame, [&] { decode_frame(b, f); });
    expect_code(ErrorCode::TruncatedFrame, [&] { decode_frame(std::span(good).first(5), f); });

    Frame wrong{FrameKind::Rekey, 0, 3, VectorBody{{1, 2}}};
    expect_code(ErrorCode::LengthMismatch, [&] { encode_frame(wrong); });
    Frame mismatch{FrameKind::Rekey, 0, 0, LeaveNoticeBody{"x"}};
    expect_code(ErrorCode::LengthMismatch, [&] { encode_frame(mismatch); });
}

TEST_CASE("typed helpers carry protocol values") {
    const PrimeField f;
    SeededRandom rng(3);
    auto g = GroupState::init(f, 2, 5, rng);
    g.set_provision_aggregate(true);
    const auto joined = g.join("alice", f.element(12));
    const Frame issue = decode_frame(encode_frame(key_issue_frame(joined.key)), f);
    const MemberKey back = to_member_key(issue, f);
    CHECK(back.slot == joined.key.slot);
    CHECK(back.v == joined.key.v);
    CHECK(back.norm_inv == joined.key.norm_inv);
    CHECK(back.epoch_issued == joined.key.epoch_issued);
    REQUIRE(back.aggregate.has_value());
    CHECK(*back.aggregate == g.aggregate());
    CHECK(recover_secret(back, joined.message) == f.element(12));

    const auto ctx = AuthContext::from_broadcast(back, joined.message);
    const auto pending = make_challenge(ctx, rng);
    const auto ch = to_challenge(decode_frame(encode_frame(challenge_frame(pending.challenge)), f), f);
    CHECK(ch == pending.challenge);
    const auto resp = answer_challenge(ctx, ch);
    CHECK(to_response(decode_frame(encode_frame(response_frame(resp)), f), f) == resp);

    const Frame join = decode_frame(encode_frame(join_request_frame("alice", "pw")), f);
    CHECK(std::get<JoinRequestBody>(join.body).member_id == "alice");
    const Frame err = decode_frame(encode_frame(error_frame(ErrorCode::GroupFull, "full")), f);
    CHECK(std::get<ErrorBody>(err.body).code == ErrorCode::GroupFull);
    expect_code(ErrorCode::BadKind, [&] { to_rekey(err, f); });
}

TEST_CASE("REKEY payload at m = 10000 is 80000 bytes") {
    const PrimeField f;
    const RekeyMessage msg{1, FVector(f, 10000)};
    CHECK(encode_frame(rekey_frame(msg)).size() - kHeaderBytes == 80000);
}

TEST_CASE("message length estimators") {
    CHECK(rekey_length_bytes({10000, 64, Scheme::Orthogonal}) == 80000);
    CHECK(rekey_length_bytes({10000, 1024, Scheme::Euclides}) == 1280000);
    CHECK(rekey_length_bytes({1, 64, Scheme::Orthogonal}) == 8);
    CHECK(rekey_length_bytes({3, 2048, Scheme::SecureLock}) == 768);
    for (std::uint64_t n = 1; n < 200; ++n) {
        REQUIRE(rekey_length_bytes({n + 1, 64, Scheme::Orthogonal}) -
                    rekey_length_bytes({n, 64, Scheme::Orthogonal}) ==
                8);
    }
    expect_code(ErrorCode::ParamsRejected, [] { rekey_length_bytes({0, 64, Scheme::Orthogonal}); });
}

TEST_CASE("demo frames") {
    const DemoRekeyMessage msg{1, {0, -16, 40}};
    const Bytes bytes = encode_demo_frame(msg);
    CHECK(frame_version(bytes) == kDemoVersion);
    CHECK(decode_demo_frame(bytes) == msg);
    const std::string body(reinterpret_cast<const char*>(bytes.data()) + kHeaderBytes,
                           bytes.size() - kHeaderBytes);
    CHECK(body == "0,-16,40");
    expect_code(ErrorCode::BadVersion, [&] { decode_frame(bytes, PrimeField()); });
    Bytes bad = bytes;
    bad.back() = std::byte{'x'};
    expect_code(ErrorCode::LengthMismatch, [&] { decode_demo_frame(bad); });
    bad = bytes;
    bad.pop_back();
    bad.pop_back();
    bad.pop_back();
    expect_code(ErrorCode::LengthMismatch, [&] { decode_demo_frame(bad); });
}

TEST_CASE("capture files round trip") {
    const PrimeField f;
    SeededRandom rng(4);
    std::vector<Bytes> frames;
    for (int i = 0; i < 50; ++i) {
        frames.push_back(encode_frame(random_frame(f, rng)));
    }
    const auto path = temp_file("capture.bin");
    std::filesystem::remove(path);
    {
        CaptureWriter w(path);
        for (const auto& fr : frames) {
            w.append(fr);
        }
    }
    CHECK(read_capture(path) == frames);
    CHECK(parse_capture(to_capture(frames)) == frames);

    std::filesystem::remove(path);
    std::ofstream(path).close();
    CHECK(read_capture(path).empty());
    std::filesystem::remove(path);

    Bytes cap = to_capture(frames);
    cap.pop_back();
    expect_code(ErrorCode::CorruptCapture, [&] { parse_capture(cap); });
    const Bytes stub{std::byte{1}, std::byte{0}};
    expect_code(ErrorCode::CorruptCapture, [&] { parse_capture(stub); });
    const Bytes huge{std::byte{0xff}, std::byte{0xff}, std::byte{0xff}, std::byte{0xff}};
    expect_code(ErrorCode::CorruptCapture, [&] { parse_capture(huge); });
}

TEST_CASE("capture of the integer example") {
    const std::vector<DemoVector> basis{{1, 1, 1}, {1, -2, 1}, {-1, 0, 1}};
    DemoGroup g(basis, {2, 3, 5});
    std::vector<Bytes> frames{encode_demo_frame(g.build_rekey(4)), encode_demo_frame(g.leave(1, 2, 3)),
                              encode_demo_frame(g.leave(0, 3, 2))};
    const auto path = temp_file("demo.bin");
    std::filesystem::remove(path);
    {
        CaptureWriter w(path);
        for (const auto& fr : frames) {
            w.append(fr);
        }
    }
    const auto back = read_capture(path);
    std::filesystem::remove(path);
    REQUIRE(back.size() == 3);
    CHECK(decode_demo_frame(back[0]).c == DemoVector{0, -16, 40});
    CHECK(decode_demo_frame(back[1]).c == DemoVector{-3, -6, 27});
    CHECK(decode_demo_frame(back[2]).c == DemoVector{0, -2, 20});
}

TEST_CASE("capture feeds an attack transcript") {
    const PrimeField f;
    SeededRandom rng(5);
    auto g = GroupState::init(f, 2, 5, rng);
    std::vector<Bytes> frames;
    frames.push_back(encode_frame(rekey_frame(g.join("a", f.element(3)).message)));
    frames.push_back(encode_frame(join_request_frame("b", "pw")));
    frames.push_back(encode_frame(rekey_frame(g.rekey(rng))));
    const auto msgs = rekeys_from_capture(frames, f);
    REQUIRE(msgs.size() == 2);
    CHECK(msgs[0].epoch < msgs[1].epoch);
}
