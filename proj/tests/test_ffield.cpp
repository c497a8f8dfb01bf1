#include "doctest.h"

#include "okmp/error.hpp"
#include "okmp/ffield.hpp"
#include "test_util.hpp"

#include <array>
#include <cmath>

using namespace okmp;
using okmp::test_support::expect_code;

namespace {

// Brute-force inverse: the unique b in [1, p) with a*b = 1.
std::uint64_t exhaustive_inverse(std::uint64_t a, std::uint64_t p) {
    for (std::uint64_t b = 1; b < p; ++b) {
        if ((a * b) % p == 1) {
            return b;
        }
    }
    return 0;
}

// Extended Euclid, independent of the exponentiation path.
std::uint64_t euclid_inverse(std::uint64_t a, std::uint64_t p) {
    DemoInt t = 0, new_t = 1, r = p, new_r = a;
    while (new_r != 0) {
        DemoInt q = r / new_r;
        DemoInt tmp = t - q * new_t;
        t = new_t;
        new_t = tmp;
        tmp = r - q * new_r;
        r = new_r;
        new_r = tmp;
    }
    if (t < 0) {
        t += p;
    }
    return static_cast<std::uint64_t>(t);
}

} // namespace

TEST_CASE("ring operations wrap in F_7") {
    const auto f = PrimeField::testing(7);
    CHECK(f.add(f.element(5), f.element(4)) == f.element(2));
    CHECK(f.mul(f.element(3), f.element(5)) == f.element(1));
    CHECK(f.sub(f.element(2), f.element(5)) == f.element(4));
    CHECK(f.neg(f.element(3)) == f.element(4));
    CHECK(fe_add(f.element(5), f.element(4)) == f.element(2));
    CHECK(fe_mul(f.element(3), f.element(5)) == f.element(1));
}

TEST_CASE("(p-1)^2 in F_{2^61-1} against big-integer reduction") {
    const PrimeField f;
    const std::uint64_t p = f.modulus();
    const DemoInt expected = (DemoInt(p - 1) * DemoInt(p - 1)) % DemoInt(p);
    CHECK(expected == 1);
    CHECK(f.mul(f.element(p - 1), f.element(p - 1)).value() == static_cast<std::uint64_t>(expected));

    SeededRandom rng(3);
    for (int i = 0; i < 2000; ++i) {
        const Fe a = f.rand(rng);
        const Fe b = f.rand(rng);
        const DemoInt prod = (DemoInt(a.value()) * DemoInt(b.value())) % DemoInt(p);
        REQUIRE(f.mul(a, b).value() == static_cast<std::uint64_t>(prod));
    }
}

TEST_CASE("inverses match exhaustive search") {
    const auto f7 = PrimeField::testing(7);
    CHECK(exhaustive_inverse(4, 7) == 2);
    CHECK(f7.inv(f7.element(4)) == f7.element(2));
    CHECK(f7.inv(f7.element(1)) == f7.element(1));
    const auto f13 = PrimeField::testing(13);
    CHECK(exhaustive_inverse(5, 13) == 8);
    CHECK(f13.inv(f13.element(5)) == f13.element(8));
    CHECK(fe_inv(f13.element(5)) == f13.element(8));
    for (std::uint64_t a = 1; a < 13; ++a) {
        CHECK(f13.inv(f13.element(a)).value() == exhaustive_inverse(a, 13));
    }
}

TEST_CASE("exponentiation inverse agrees with extended Euclid") {
    for (std::uint64_t p : {std::uint64_t{10007}, kDefaultPrime, std::uint64_t{18446744073709551557ULL}}) {
        const PrimeField f(p, FieldMode::Test);
        SeededRandom rng(p);
        for (int i = 0; i < 300; ++i) {
            const Fe a = f.rand_nonzero(rng);
            REQUIRE(f.inv(a).value() == euclid_inverse(a.value(), p));
        }
    }
}

TEST_CASE("inverse of zero") {
    const auto f = PrimeField::testing(7);
    expect_code(ErrorCode::ZeroInverse, [&] { f.inv(f.zero()); });
    expect_code(ErrorCode::ZeroInverse, [&] { fe_inv(f.zero()); });
}

TEST_CASE("field mismatch is rejected") {
    const auto f7 = PrimeField::testing(7);
    const auto f13 = PrimeField::testing(13);
    expect_code(ErrorCode::FieldMismatch, [&] { f7.add(f7.one(), f13.one()); });
    expect_code(ErrorCode::FieldMismatch, [&] { fe_mul(f7.one(), f13.one()); });
}

TEST_CASE("construction validates the modulus") {
    expect_code(ErrorCode::NotPrime, [] { PrimeField(15, FieldMode::Test); });
    expect_code(ErrorCode::NotPrime, [] { PrimeField((std::uint64_t{1} << 61) + 1); });
    expect_code(ErrorCode::FieldTooSmall, [] { PrimeField(7); });
    CHECK_NOTHROW(PrimeField(2147483659ULL));
    CHECK(PrimeField().elem_bits() == 64);
    CHECK(PrimeField().modulus_bits() == 61);
}

TEST_CASE("Miller-Rabin against trial division") {
    auto trial = [](std::uint64_t n) {
        if (n < 2) {
            return false;
        }
        for (std::uint64_t d = 2; d * d <= n; ++d) {
            if (n % d == 0) {
                return false;
            }
        }
        return true;
    };
    for (std::uint64_t n = 0; n < 20000; ++n) {
        REQUIRE(is_prime_u64(n) == trial(n));
    }
    // Strong pseudoprimes to several small bases.
    CHECK_FALSE(is_prime_u64(3215031751ULL));
    CHECK_FALSE(is_prime_u64(3825123056546413051ULL));
    CHECK(is_prime_u64(kDefaultPrime));
}

TEST_CASE("random nonzero draws are in range and reproducible") {
    const auto f = PrimeField::testing(7);
    SeededRandom a(42), b(42);
    for (int i = 0; i < 100; ++i) {
        const Fe x = fe_rand_nonzero(f, a);
        CHECK(x.value() >= 1);
        CHECK(x.value() <= 6);
        CHECK(x == f.rand_nonzero(b));
    }
}

TEST_CASE("random nonzero draws are uniform (chi-square, 5 sigma)") {
    const auto f = PrimeField::testing(7);
    SeededRandom rng(2024);
    constexpr int kDraws = 100000;
    std::array<int, 7> counts{};
    for (int i = 0; i < kDraws; ++i) {
        ++counts[f.rand_nonzero(rng).value()];
    }
    CHECK(counts[0] == 0);
    const double expected = kDraws / 6.0;
    const double sigma = std::sqrt(kDraws * (1.0 / 6.0) * (5.0 / 6.0));
    double chi2 = 0;
    for (int r = 1; r <= 6; ++r) {
        CHECK(std::abs(counts[r] - expected) < 5 * sigma);
        chi2 += (counts[r] - expected) * (counts[r] - expected) / expected;
    }
    // 5 degrees of freedom: mean 5, sd sqrt(10).
    CHECK(chi2 < 5 + 5 * std::sqrt(10.0));
}

TEST_CASE("field axioms hold on random triples") {
    for (std::uint64_t p : {std::uint64_t{7}, std::uint64_t{10007}, kDefaultPrime,
                            std::uint64_t{18446744073709551557ULL}}) {
        const PrimeField f(p, FieldMode::Test);
        SeededRandom rng(p * 31);
        for (int i = 0; i < 500; ++i) {
            const Fe a = f.rand(rng), b = f.rand(rng), c = f.rand(rng);
            REQUIRE(f.add(f.add(a, b), c) == f.add(a, f.add(b, c)));
            REQUIRE(f.mul(f.mul(a, b), c) == f.mul(a, f.mul(b, c)));
            REQUIRE(f.add(a, b) == f.add(b, a));
            REQUIRE(f.mul(a, b) == f.mul(b, a));
            REQUIRE(f.mul(a, f.add(b, c)) == f.add(f.mul(a, b), f.mul(a, c)));
            REQUIRE(f.sub(f.add(a, b), b) == a);
            if (!a.is_zero()) {
                REQUIRE(f.inv(f.inv(a)) == a);
                REQUIRE(f.mul(a, f.inv(a)) == f.one());
            }
        }
    }
}

TEST_CASE("signed literals and canonical decoding") {
    const auto f = PrimeField::testing(7);
    CHECK(f.from_signed(-1) == f.element(6));
    CHECK(f.from_signed(-16) == f.element(5));
    CHECK(f.from_signed(INT64_MIN).value() < 7);
    expect_code(ErrorCode::NonCanonical, [&] { f.from_canonical(7); });

    const PrimeField big;
    const Fe x = big.element(0x0123456789abcdefULL % big.modulus());
    const auto bytes = encode_element(x);
    CHECK(decode_element(big, bytes) == x);
    CHECK(load_le64(bytes.data()) == x.value());
    CHECK(bytes[0] == std::byte{static_cast<unsigned char>(x.value() & 0xff)});
    std::array<std::byte, 8> too_big{};
    store_le64(big.modulus(), too_big.data());
    expect_code(ErrorCode::NonCanonical, [&] { decode_element(big, too_big); });
}

TEST_CASE("demo integers round-trip through decimal") {
    const DemoInt v = demo_int_from_decimal("-123456789012345678901234567890");
    CHECK(to_decimal(v) == "-123456789012345678901234567890");
    CHECK(demo_int_from_decimal("0") == 0);
    CHECK_THROWS_AS(demo_int_from_decimal("12a"), std::invalid_argument);
    CHECK_THROWS_AS(demo_int_from_decimal("-"), std::invalid_argument);
}
