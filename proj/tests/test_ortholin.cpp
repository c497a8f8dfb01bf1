#include "doctest.h"

#include "okmp/ortholin.hpp"
#include "test_util.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <algorithm>
#include <cmath>
#include <string>

using namespace okmp;
using okmp::test_support::expect_code;

namespace {

// Independent O(n^2) check through the field API rather than the kernels.
bool pairwise_orthogonal(const OrthogonalSystem& sys) {
    const auto& f = sys.field();
    for (std::size_t i = 0; i < sys.count(); ++i) {
        const FVector a = sys.vector(i);
        Fe self = f.zero();
        for (std::size_t k = 0; k < a.dim(); ++k) {
            self = f.add(self, f.mul(a.at(k), a.at(k)));
        }
        if (self.is_zero()) {
            return false;
        }
        for (std::size_t j = i + 1; j < sys.count(); ++j) {
            const FVector b = sys.vector(j);
            Fe acc = f.zero();
            for (std::size_t k = 0; k < a.dim(); ++k) {
                acc = f.add(acc, f.mul(a.at(k), b.at(k)));
            }
            if (!acc.is_zero()) {
                return false;
            }
        }
    }
    return true;
}

FVector random_vector(const PrimeField& f, std::size_t m, RandomSource& rng) {
    FVector v(f, m);
    for (std::size_t i = 0; i < m; ++i) {
        v.set(i, f.rand(rng));
    }
    return v;
}

} // namespace

TEST_CASE("inner product on the worked example vectors") {
    const DemoVector c{0, -16, 40};
    const DemoVector v{2, 2, 2};
    CHECK(inner(c, v) == 48);
    CHECK(inner(v, v) == 12);
    CHECK(inner(v, DemoVector{0, 0, 0}) == 0);

    const PrimeField f;
    SeededRandom rng(8);
    const FVector a = random_vector(f, 9, rng);
    CHECK(inner(a, FVector(f, 9)).is_zero());
    expect_code(ErrorCode::DimMismatch, [&] { inner(a, FVector(f, 8)); });
}

TEST_CASE("bilinearity and symmetry") {
    const PrimeField f;
    SeededRandom rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t m = 1 + rng.uniform_below(40);
        const FVector a = random_vector(f, m, rng);
        const FVector b = random_vector(f, m, rng);
        const FVector c = random_vector(f, m, rng);
        const Fe alpha = f.rand(rng);
        REQUIRE(inner(add(scale(alpha, a), b), c) ==
                f.add(f.mul(alpha, inner(a, c)), inner(b, c)));
        REQUIRE(inner(a, b) == inner(b, a));
        REQUIRE(sub(add(a, b), b) == a);
    }
}

TEST_CASE("vector construction checks canonical residues") {
    const auto f = PrimeField::testing(7);
    expect_code(ErrorCode::NonCanonical, [&] { FVector(f, std::vector<std::uint64_t>{1, 7}); });
    const FVector v = FVector::from_signed(f, {1, -2, 1});
    CHECK(v.coords()[1] == 5);
    CHECK(v.nonzero_count() == 3);
    CHECK_FALSE(v.is_zero());
    CHECK(FVector(f, 4).is_zero());
}

TEST_CASE("verify_orthogonal on small fixed systems") {
    const std::vector<DemoVector> example{{1, 1, 1}, {1, -2, 1}, {-1, 0, 1}};
    CHECK(verify_orthogonal(example).ok());

    const std::vector<DemoVector> skew{{1, 0}, {1, 1}};
    const auto report = verify_orthogonal(skew);
    CHECK_FALSE(report.ok());
    REQUIRE(report.non_orthogonal.size() == 1);
    CHECK(report.non_orthogonal[0] == std::pair<std::size_t, std::size_t>{0, 1});

    const auto f5 = PrimeField::testing(5);
    const std::vector<FVector> iso{FVector::from_signed(f5, {1, 2})};
    const auto sys = OrthogonalSystem::from_vectors(f5, iso);
    const auto r = verify_orthogonal(sys);
    REQUIRE(r.isotropic.size() == 1);
    CHECK(r.isotropic[0] == 0);
    CHECK(r.non_orthogonal.empty());
    expect_code(ErrorCode::IsotropicKey, [&] { sys.norm_inv(0); });
}

TEST_CASE("generation over F_7") {
    const auto f = PrimeField::testing(7);
    SeededRandom rng(1);
    const auto sys = gen_orthogonal_system(f, 5, 2, rng);
    CHECK(sys.count() == 2);
    CHECK(sys.dim() == 5);
    CHECK(verify_orthogonal(sys).ok());

    SeededRandom rng2(1);
    expect_code(ErrorCode::DimTooSmall, [&] { gen_orthogonal_system(f, 3, 4, rng2); });
}

TEST_CASE("full bases of F_7^5 over 200 seeds") {
    const auto f = PrimeField::testing(7);
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        SeededRandom rng(seed);
        const auto sys = gen_orthogonal_system(f, 5, 5, rng);
        REQUIRE(pairwise_orthogonal(sys));
        REQUIRE(verify_orthogonal(sys).ok());
    }
}

TEST_CASE("generation over the default field across seeds and shapes") {
    const PrimeField f;
    for (auto [m, n] : {std::pair<std::size_t, std::size_t>{5, 2}, {11, 5}, {41, 20}}) {
        for (std::uint64_t seed = 0; seed < 200; ++seed) {
            SeededRandom rng(seed * 1000 + m);
            const auto sys = gen_orthogonal_system(f, m, n, rng);
            REQUIRE(sys.count() == n);
            REQUIRE(verify_orthogonal(sys).ok());
            for (std::size_t i = 0; i < n; ++i) {
                REQUIRE(sys.vector(i).nonzero_count() >= 2);
            }
        }
        SeededRandom rng(m);
        REQUIRE(pairwise_orthogonal(gen_orthogonal_system(f, m, n, rng)));
    }
}

TEST_CASE("protocol mode requires m > 2n") {
    const PrimeField f;
    SeededRandom rng(3);
    expect_code(ErrorCode::ParamsRejected, [&] { gen_orthogonal_system(f, 6, 3, rng); });
    CHECK_NOTHROW(gen_orthogonal_system(PrimeField(kDefaultPrime, FieldMode::Test), 6, 3, rng));
}

TEST_CASE("generation is deterministic and backend independent") {
    const PrimeField f;
    SeededRandom a(2024), b(2024), c(2024);
    GenOptions serial_opts;
    serial_opts.backend = kernels::Backend::Serial;
    const auto s1 = gen_orthogonal_system(f, 4001, 40, a);
    const auto s2 = gen_orthogonal_system(f, 4001, 40, b);
    const auto s3 = gen_orthogonal_system(f, 4001, 40, c, serial_opts);
    CHECK(s1 == s2);
    CHECK(s1 == s3);
    CHECK(verify_orthogonal(s1).ok());

    SeededRandom d(2025);
    CHECK_FALSE(gen_orthogonal_system(f, 4001, 40, d) == s1);
}

TEST_CASE("system export and import round-trip") {
    const PrimeField f;
    SeededRandom rng(6);
    const auto sys = gen_orthogonal_system(f, 11, 5, rng);
    const auto bytes = sys.export_bytes();
    CHECK(bytes.size() == 16 + 11 * 5 * 8);
    CHECK(load_le64(bytes.data()) == f.modulus());
    const auto back = OrthogonalSystem::import_bytes(bytes, FieldMode::Protocol);
    CHECK(back == sys);
    CHECK(back.norm(3) == sys.norm(3));

    expect_code(ErrorCode::TruncatedFrame, [&] {
        OrthogonalSystem::import_bytes(std::span(bytes).first(10), FieldMode::Protocol);
    });
    expect_code(ErrorCode::LengthMismatch, [&] {
        OrthogonalSystem::import_bytes(std::span(bytes).first(bytes.size() - 8), FieldMode::Protocol);
    });
    auto corrupt = bytes;
    store_le64(f.modulus(), corrupt.data() + 16);
    expect_code(ErrorCode::NonCanonical,
                [&] { OrthogonalSystem::import_bytes(corrupt, FieldMode::Protocol); });
}

TEST_CASE("prefix keeps the leading vectors") {
    const PrimeField f;
    SeededRandom rng(4);
    const auto sys = gen_orthogonal_system(f, 21, 10, rng);
    const auto head = sys.prefix(4);
    CHECK(head.count() == 4);
    CHECK(head.vector(3) == sys.vector(3));
    CHECK(verify_orthogonal(head).ok());
}

TEST_CASE("canonical basis is a test-mode misconfiguration") {
    expect_code(ErrorCode::WrongMode, [] { OrthogonalSystem::canonical(PrimeField(), 5, 2); });
    const auto sys = OrthogonalSystem::canonical(PrimeField::testing(7), 2, 2);
    CHECK(sys.vector(0) == FVector::from_signed(PrimeField::testing(7), {1, 0}));
}

TEST_CASE("orthogonal tuple count estimate") {
    CHECK(tuple_count_log2(2, 1) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(tuple_count_log2(7, 1) == doctest::Approx(4.2110323830864061).epsilon(1e-12));

    // 1.5 n^2 log2 q - log2 n! at 100 digits.
    using Big = boost::multiprecision::cpp_bin_float_100;
    const Big q = Big(kDefaultPrime);
    Big ln_fact = 0;
    for (int k = 2; k <= 64; ++k) {
        ln_fact += log(Big(k));
    }
    const Big oracle = (Big(1.5) * 64 * 64 * log(q) - ln_fact) / log(Big(2));
    CHECK(std::abs(oracle.convert_to<double>() - 374488.00485605827595) < 1e-9);
    const double got = tuple_count_log2(kDefaultPrime, 64);
    CHECK(got == doctest::Approx(374488.00485605827595).epsilon(1e-12));
    CHECK(got > kSecurityBits);
}

TEST_CASE("parameter advice") {
    const auto ten = advise_params(10, PrimeField());
    CHECK(ten.dim == 21);
    CHECK(ten.warnings.empty());
    CHECK(advise_params(10000, PrimeField()).dim == 20001);

    const auto tiny = advise_params(1, PrimeField::testing(7));
    CHECK(tiny.dim == 3);
    CHECK(tiny.security_log2 == doctest::Approx(tuple_count_log2(7, 1)));
    const bool flagged = std::any_of(tiny.warnings.begin(), tiny.warnings.end(), [](const std::string& w) {
        return w.find("security margin below 128 bits") != std::string::npos;
    });
    CHECK(flagged);
}
