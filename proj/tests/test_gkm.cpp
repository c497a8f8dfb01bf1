#include "doctest.h"

#include "okmp/gkm.hpp"
#include "test_util.hpp"

#include <string>
#include <vector>

using namespace okmp;
using okmp::test_support::expect_code;

namespace {

const std::vector<DemoVector> kExampleBasis{{1, 1, 1}, {1, -2, 1}, {-1, 0, 1}};

DemoGroup example_group() { return DemoGroup(kExampleBasis, {2, 3, 5}); }

GroupState toy_f7() {
    const auto f = PrimeField::testing(7);
    const std::vector<Fe> x{f.element(2), f.element(3)};
    return GroupState::with_scalars(OrthogonalSystem::canonical(f, 2, 2), x, f.one());
}

// sum_i x_i e_i through the field API.
FVector brute_force_aggregate(const GroupState& g) {
    FVector acc(g.field(), g.dim());
    for (std::size_t i = 0; i < g.capacity(); ++i) {
        acc = add(acc, scale(g.scalar(i), g.system().vector(i)));
    }
    return acc;
}

std::string member(std::size_t i) { return "m" + std::to_string(i); }

} // namespace

TEST_CASE("integer example: aggregate, broadcasts and recovery") {
    DemoGroup g = example_group();
    CHECK(g.aggregate() == DemoVector{0, -4, 10});
    CHECK(g.member_vector(0) == DemoVector{2, 2, 2});

    const auto c1 = g.build_rekey(4);
    CHECK(c1.c == DemoVector{0, -16, 40});
    CHECK(c1.epoch == 1);
    CHECK(recover_secret(g.member_vector(0), c1) == 4);

    const auto c2 = g.leave(1, 2, 3);
    CHECK(c2.c == DemoVector{-3, -6, 27});
    CHECK(recover_secret(g.member_vector(0), c2) == 3);

    const DemoVector old_first = g.member_vector(0);
    const auto c3 = g.leave(0, 3, 2);
    CHECK(c3.c == DemoVector{0, -2, 20});
    CHECK(recover_secret(g.member_vector(2), c3) == 2);
    // Departed key: s' x' / x = 2 * 3 / 2.
    CHECK(recover_secret(old_first, c3) == DemoRational(3));

    CHECK(g.build_rekey(1).c == g.aggregate());
}

TEST_CASE("integer example rejects bad input") {
    expect_code(ErrorCode::ParamsRejected, [] { DemoGroup({{1, 0}, {1, 1}}, {1, 1}); });
    expect_code(ErrorCode::ParamsRejected, [] { DemoGroup(kExampleBasis, {2, 0, 5}); });
    DemoGroup g = example_group();
    expect_code(ErrorCode::ZeroSecret, [&] { g.build_rekey(0); });
    expect_code(ErrorCode::ParamsRejected, [&] { g.leave(1, 3, 2); });
}

TEST_CASE("gcd leakage over the integers") {
    const std::vector<DemoRekeyMessage> msgs{{1, {0, -16, 40}}, {2, {-3, -6, 27}}};
    const std::vector<DemoInt> secrets{4, 3};
    const auto report = gcd_leak_probe(msgs, secrets);
    REQUIRE(report.entries.size() == 2);
    CHECK(report.entries[0].gcd == 8);
    CHECK(report.entries[0].secret_divides);
    CHECK(report.entries[1].gcd == 3);
    CHECK(report.all_divide());

    const std::vector<DemoInt> wrong{5, 3};
    CHECK_FALSE(gcd_leak_probe(msgs, wrong).all_divide());
    expect_code(ErrorCode::DimMismatch, [&] { gcd_leak_probe(msgs, std::span(secrets).first(1)); });

    auto g = toy_f7();
    const std::vector<RekeyMessage> field_msgs{g.rekey(*make_random(1))};
    const std::vector<Fe> field_secrets{g.current_secret()};
    expect_code(ErrorCode::WrongMode, [&] { gcd_leak_probe(field_msgs, field_secrets); });
}

TEST_CASE("secret divides the gcd in random integer groups") {
    SeededRandom rng(100);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng.uniform_below(4);
        const std::size_t m = n + rng.uniform_below(3);
        DemoGroup g = DemoGroup::random(m, n, rng);
        REQUIRE(verify_orthogonal(g.basis()).ok());
        std::vector<DemoRekeyMessage> msgs;
        std::vector<DemoInt> secrets;
        for (int r = 0; r < 3; ++r) {
            const DemoInt s = 1 + static_cast<int>(rng.uniform_below(50));
            msgs.push_back(g.build_rekey(s));
            secrets.push_back(s);
            REQUIRE(recover_secret(g.member_vector(0), msgs.back()) == DemoRational(s));
        }
        REQUIRE(gcd_leak_probe(msgs, secrets).all_divide());
    }
}

TEST_CASE("F_7 toy broadcast and recovery") {
    auto g = toy_f7();
    const auto& f = g.field();
    const auto joined = g.join("alice", f.element(4));
    CHECK(joined.message.c == FVector::from_signed(f, {1, 5}));
    CHECK(joined.key.v == FVector::from_signed(f, {2, 0}));
    CHECK(joined.key.norm_inv == f.element(2));
    CHECK(inner(joined.message.c, joined.key.v) == f.element(2));
    CHECK(recover_secret(joined.key, joined.message) == f.element(4));

    const auto one = g.build_rekey(f.one());
    CHECK(one.c == g.aggregate());
    CHECK(recover_secret(joined.key, one) == f.one());
    expect_code(ErrorCode::ZeroSecret, [&] { g.build_rekey(f.zero()); });
}

TEST_CASE("group initialisation") {
    const PrimeField f;
    SeededRandom rng(9);
    const auto g = GroupState::init(f, 3, 7, rng);
    CHECK(g.aggregate() == brute_force_aggregate(g));
    CHECK(g.aggregate_consistent());
    CHECK(g.epoch() == 0);
    CHECK(g.free_count() == 3);
    CHECK_FALSE(g.current_secret().is_zero());
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK_FALSE(g.scalar(i).is_zero());
    }
    expect_code(ErrorCode::ParamsRejected, [&] { GroupState::init(f, 3, 3, rng); });
    CHECK_NOTHROW(GroupState::init(PrimeField(kDefaultPrime, FieldMode::Test), 3, 3, rng));
}

TEST_CASE("join binds free slots") {
    SeededRandom rng(12);
    auto g = GroupState::init(PrimeField(), 2, 5, rng);
    const FVector before = g.aggregate();
    const auto a = g.join("a", g.field().element(17));
    CHECK(a.key.slot == 0);
    CHECK(a.key.v == scale(g.scalar(0), g.system().vector(0)));
    CHECK(g.aggregate() == before);
    CHECK(recover_secret(a.key, a.message) == g.field().element(17));
    expect_code(ErrorCode::DuplicateMember, [&] { g.join("a", g.field().one()); });
    const auto b = g.join("b", g.field().element(5));
    CHECK(b.key.slot == 1);
    CHECK(g.free_count() == 0);
    expect_code(ErrorCode::GroupFull, [&] { g.join("c", g.field().one()); });
    expect_code(ErrorCode::UnknownMember, [&] { g.leave("zed", g.field().one(), rng); });
}

TEST_CASE("every member recovers the secret; departed members do not") {
    const PrimeField f;
    SeededRandom rng(31337);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.uniform_below(trial < 950 ? 8 : 64);
        auto g = GroupState::init(f, n, 2 * n + 1, rng);
        std::vector<MemberKey> keys;
        for (std::size_t i = 0; i < n; ++i) {
            keys.push_back(g.join(member(i), f.rand_nonzero(rng)).key);
        }
        const Fe s = f.rand_nonzero(rng);
        const auto msg = g.build_rekey(s);
        for (const auto& key : keys) {
            REQUIRE(recover_secret(key, msg) == s);
        }

        const std::size_t j = rng.uniform_below(n);
        const Fe old_x = g.scalar(j);
        const Fe s2 = f.rand_nonzero(rng);
        const auto after = g.leave(member(j), s2, rng);
        const Fe new_x = g.scalar(j);
        REQUIRE(new_x != old_x);
        const Fe got = recover_secret(keys[j], after);
        REQUIRE(got == f.mul(f.mul(s2, new_x), f.inv(old_x)));
        REQUIRE(got != s2);
        for (std::size_t i = 0; i < n; ++i) {
            if (i != j) {
                REQUIRE(recover_secret(keys[i], after) == s2);
            }
        }
        REQUIRE(g.aggregate_consistent());
    }
}

TEST_CASE("single leave costs four field operations") {
    SeededRandom rng(4);
    auto g = GroupState::init(PrimeField(), 5, 11, rng);
    g.join("a", g.field().one());
    g.join("b", g.field().one());
    g.leave("a", g.field().element(9), rng);
    CHECK(g.last_ops() == OpCounter{1, 2, 1});
    CHECK(g.last_ops().total() == 4);
    g.build_rekey(g.field().element(3));
    CHECK(g.last_ops() == OpCounter{0, 1, 0});
}

TEST_CASE("replacement scalar must change outside test mode") {
    SeededRandom rng(5);
    auto g = GroupState::init(PrimeField(), 2, 5, rng);
    g.join("a", g.field().one());
    expect_code(ErrorCode::ParamsRejected,
                [&] { g.leave_with_scalar("a", g.scalar(0), g.field().one()); });
    expect_code(ErrorCode::ParamsRejected,
                [&] { g.leave_with_scalar("a", g.field().zero(), g.field().one()); });

    auto toy = toy_f7();
    toy.join("a", toy.field().one());
    CHECK_NOTHROW(toy.leave_with_scalar("a", toy.scalar(0), toy.field().element(2)));
}

TEST_CASE("aggregate stays consistent through mixed operations") {
    const PrimeField f;
    SeededRandom rng(606);
    auto g = GroupState::init(f, 12, 25, rng);
    std::vector<std::string> bound;
    std::size_t next = 0;
    std::uint64_t last_epoch = g.epoch();
    for (int step = 0; step < 300; ++step) {
        const auto op = rng.uniform_below(5);
        const Fe s = f.rand_nonzero(rng);
        if (op == 0 && g.free_count() > 0) {
            bound.push_back(member(next++));
            g.join(bound.back(), s);
        } else if (op == 1 && !bound.empty()) {
            const auto idx = rng.uniform_below(bound.size());
            g.leave(bound[idx], s, rng);
            bound.erase(bound.begin() + static_cast<std::ptrdiff_t>(idx));
        } else if (op == 2 && bound.size() >= 2) {
            std::vector<MemberId> batch{bound[0], bound[1]};
            g.batch_refresh(batch, s, rng);
            bound.erase(bound.begin(), bound.begin() + 2);
        } else if (op == 3) {
            g.rotate_all(s, rng);
        } else {
            g.build_rekey(s);
        }
        REQUIRE(g.epoch() > last_epoch);
        last_epoch = g.epoch();
        REQUIRE(g.aggregate_consistent());
        REQUIRE(g.aggregate() == brute_force_aggregate(g));
        REQUIRE(g.bound_count() == bound.size());
    }
}

TEST_CASE("batch refresh equals sequential leaves with the same draws") {
    const PrimeField f;
    SeededRandom setup_a(1), setup_b(1);
    auto a = GroupState::init(f, 6, 13, setup_a);
    auto b = GroupState::init(f, 6, 13, setup_b);
    for (auto* g : {&a, &b}) {
        for (const char* id : {"A", "B", "C"}) {
            g->join(id, f.one());
        }
    }
    SeededRandom draw_a(77), draw_b(77);
    const Fe s = f.element(1234);
    const std::vector<MemberId> batch{"A", "B"};
    const auto batched = a.batch_refresh(batch, s, draw_a);
    b.leave("A", f.element(99), draw_b);
    const auto seq = b.leave("B", s, draw_b);
    CHECK(a.aggregate() == b.aggregate());
    CHECK(batched.c == seq.c);
    CHECK(a.last_ops() == OpCounter{2, 3, 2});

    SeededRandom one_a(3), one_b(3);
    auto c = GroupState::init(f, 4, 9, one_a);
    auto d = GroupState::init(f, 4, 9, one_b);
    c.join("x", f.one());
    d.join("x", f.one());
    const std::vector<MemberId> single{"x"};
    CHECK(c.batch_refresh(single, s, one_a).c == d.leave("x", s, one_b).c);

    const FVector before = c.aggregate();
    const auto empty = c.batch_refresh({}, f.element(5), one_a);
    CHECK(c.aggregate() == before);
    CHECK(empty.c == scale(f.element(5), before));

    const std::vector<MemberId> bad{"x", "nobody"};
    d.join("y", f.one());
    const FVector d_before = d.aggregate();
    const std::vector<MemberId> with_unknown{"y", "nobody"};
    expect_code(ErrorCode::UnknownMember, [&] { d.batch_refresh(with_unknown, s, one_b); });
    CHECK(d.aggregate() == d_before);
    CHECK(d.slot_of("y").has_value());
}

TEST_CASE("rotation invalidates outstanding keys") {
    const PrimeField f;
    SeededRandom rng(21);
    auto g = GroupState::init(f, 4, 9, rng);
    const auto key = g.join("a", f.one()).key;
    const Fe old_x = g.scalar(0);
    const Fe s = f.element(777);
    const auto msg = g.rotate_all(s, rng);
    CHECK(g.scalar(0) != old_x);
    CHECK(recover_secret(key, msg) == f.mul(f.mul(s, g.scalar(0)), f.inv(old_x)));
    CHECK(recover_secret(key, msg) != s);

    const auto fresh = g.issue_key(0);
    CHECK(recover_secret(fresh, msg) == s);
    CHECK(recover_secret(fresh, g.build_rekey(f.element(8))) == f.element(8));
    expect_code(ErrorCode::StaleEpoch, [&] { recover_secret(fresh, RekeyMessage{msg.epoch - 1, msg.c}); });
    expect_code(ErrorCode::UnknownMember, [&] { g.issue_key(3); });

    auto empty = GroupState::init(f, 3, 7, rng);
    const auto m = empty.rotate_all(f.element(2), rng);
    CHECK(m.c.dim() == 7);
    CHECK(m.c == scale(f.element(2), empty.aggregate()));
}

TEST_CASE("rotation replays identically from the same state and seed") {
    const PrimeField f;
    SeededRandom s1(55), s2(55);
    auto a = GroupState::init(f, 5, 11, s1);
    auto b = GroupState::init(f, 5, 11, s2);
    SeededRandom r1(8), r2(8);
    a.rotate_all(f.one(), r1);
    b.rotate_all(f.one(), r2);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(a.scalar(i) == b.scalar(i));
    }
}

TEST_CASE("join key is valid from the join broadcast only") {
    const PrimeField f;
    SeededRandom rng(2);
    auto g = GroupState::init(f, 3, 7, rng);
    const auto earlier = g.build_rekey(f.element(10));
    const auto joined = g.join("late", f.element(11));
    CHECK(joined.key.epoch_issued == joined.message.epoch);
    expect_code(ErrorCode::StaleEpoch, [&] { recover_secret(joined.key, earlier); });
    CHECK(recover_secret(joined.key, joined.message) == f.element(11));
}

TEST_CASE("keys carry the aggregate when provisioned") {
    SeededRandom rng(3);
    auto g = GroupState::init(PrimeField(), 2, 5, rng);
    CHECK_FALSE(g.join("a", g.field().one()).key.aggregate.has_value());
    g.set_provision_aggregate(true);
    const auto key = g.join("b", g.field().one()).key;
    REQUIRE(key.aggregate.has_value());
    CHECK(*key.aggregate == g.aggregate());
}

TEST_CASE("batch with arrivals rebinds departing ids to fresh keys") {
    const PrimeField f;
    SeededRandom rng(44);
    auto g = GroupState::init(f, 3, 7, rng);
    const auto a = g.join("a", f.one()).key;
    g.join("b", f.one());
    const std::vector<MemberId> out{"a"};
    const std::vector<MemberId> in{"a", "c"};
    const Fe s = f.element(31);
    const auto batch = g.apply_batch(out, in, s, rng);
    REQUIRE(batch.keys.size() == 2);
    CHECK(batch.keys[0].slot == 0);
    CHECK(batch.keys[1].slot == 2);
    CHECK_FALSE(batch.keys[0].v == a.v);
    for (const auto& key : batch.keys) {
        CHECK(key.epoch_issued == batch.message.epoch);
        CHECK(recover_secret(key, batch.message) == s);
    }
    CHECK(recover_secret(a, batch.message) != s);
    CHECK(g.aggregate_consistent());
    CHECK(g.free_count() == 0);

    const FVector before = g.aggregate();
    const std::vector<MemberId> dup{"b"};
    expect_code(ErrorCode::DuplicateMember, [&] { g.apply_batch({}, dup, s, rng); });
    const std::vector<MemberId> extra{"d"};
    expect_code(ErrorCode::GroupFull, [&] { g.apply_batch({}, extra, s, rng); });
    CHECK(g.aggregate() == before);
    CHECK(g.slot_of("b") == std::optional<std::size_t>{1});
}
