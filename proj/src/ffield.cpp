#include "okmp/ffield.hpp"

#include "okmp/error.hpp"

#include <bit>
#include <stdexcept>

namespace okmp {

namespace {

std::uint64_t mulmod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
    return static_cast<std::uint64_t>(static_cast<kernels::u128>(a) * b % m);
}

std::uint64_t powmod(std::uint64_t base, std::uint64_t e, std::uint64_t m) {
    std::uint64_t result = 1 % m;
    base %= m;
    while (e != 0) {
        if (e & 1) {
            result = mulmod(result, base, m);
        }
        base = mulmod(base, base, m);
        e >>= 1;
    }
    return result;
}

} // namespace

bool is_prime_u64(std::uint64_t n) {
    if (n < 2) {
        return false;
    }
    constexpr std::uint64_t kBases[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
    for (std::uint64_t q : kBases) {
        if (n % q == 0) {
            return n == q;
        }
    }
    std::uint64_t d = n - 1;
    int r = 0;
    while ((d & 1) == 0) {
        d >>= 1;
        ++r;
    }
    for (std::uint64_t a : kBases) {
        std::uint64_t x = powmod(a, d, n);
        if (x == 1 || x == n - 1) {
            continue;
        }
        bool composite = true;
        for (int i = 1; i < r; ++i) {
            x = mulmod(x, x, n);
            if (x == n - 1) {
                composite = false;
                break;
            }
        }
        if (composite) {
            return false;
        }
    }
    return true;
}

PrimeField::PrimeField(std::uint64_t p, FieldMode mode) : mod_(p), mode_(mode) {
    if (!is_prime_u64(p)) {
        throw Error(ErrorCode::NotPrime, std::to_string(p) + " is not prime");
    }
    if (mode == FieldMode::Protocol && p < kProtocolPrimeFloor) {
        throw Error(ErrorCode::FieldTooSmall,
                    "protocol mode requires p >= 2^31, got " + std::to_string(p));
    }
}

unsigned PrimeField::modulus_bits() const noexcept {
    return static_cast<unsigned>(std::bit_width(mod_.p));
}

Fe PrimeField::from_signed(std::int64_t v) const noexcept {
    if (v >= 0) {
        return element(static_cast<std::uint64_t>(v));
    }
    // Magnitude of INT64_MIN is representable as uint64.
    const std::uint64_t mag = static_cast<std::uint64_t>(-(v + 1)) + 1;
    return Fe(mod_.neg(mag % mod_.p), mod_.p);
}

Fe PrimeField::from_canonical(std::uint64_t v) const {
    if (v >= mod_.p) {
        throw Error(ErrorCode::NonCanonical, "residue " + std::to_string(v) + " >= p");
    }
    return Fe(v, mod_.p);
}

void PrimeField::check(Fe a) const {
    if (a.modulus() != mod_.p) {
        throw Error(ErrorCode::FieldMismatch, "element of F_" + std::to_string(a.modulus()) +
                                                  " used in F_" + std::to_string(mod_.p));
    }
}

Fe PrimeField::add(Fe a, Fe b) const {
    check(a);
    check(b);
    return Fe(mod_.add(a.value(), b.value()), mod_.p);
}

Fe PrimeField::sub(Fe a, Fe b) const {
    check(a);
    check(b);
    return Fe(mod_.sub(a.value(), b.value()), mod_.p);
}

Fe PrimeField::mul(Fe a, Fe b) const {
    check(a);
    check(b);
    return Fe(mod_.mul(a.value(), b.value()), mod_.p);
}

Fe PrimeField::neg(Fe a) const {
    check(a);
    return Fe(mod_.neg(a.value()), mod_.p);
}

Fe PrimeField::pow(Fe a, std::uint64_t e) const {
    check(a);
    std::uint64_t result = 1;
    std::uint64_t base = a.value();
    while (e != 0) {
        if (e & 1) {
            result = mod_.mul(result, base);
        }
        base = mod_.mul(base, base);
        e >>= 1;
    }
    return Fe(result, mod_.p);
}

Fe PrimeField::inv(Fe a) const {
    check(a);
    if (a.is_zero()) {
        throw Error(ErrorCode::ZeroInverse, "inverse of zero");
    }
    return pow(a, mod_.p - 2);
}

Fe PrimeField::rand_nonzero(RandomSource& rng) const {
    return Fe(1 + rng.uniform_below(mod_.p - 1), mod_.p);
}

Fe PrimeField::rand(RandomSource& rng) const { return Fe(rng.uniform_below(mod_.p), mod_.p); }

namespace {

kernels::Modulus common_modulus(Fe a, Fe b) {
    if (a.modulus() != b.modulus()) {
        throw Error(ErrorCode::FieldMismatch, "operands from F_" + std::to_string(a.modulus()) +
                                                  " and F_" + std::to_string(b.modulus()));
    }
    return kernels::Modulus(a.modulus());
}

} // namespace

Fe fe_add(Fe a, Fe b) { return Fe(common_modulus(a, b).add(a.value(), b.value()), a.modulus()); }
Fe fe_sub(Fe a, Fe b) { return Fe(common_modulus(a, b).sub(a.value(), b.value()), a.modulus()); }
Fe fe_mul(Fe a, Fe b) { return Fe(common_modulus(a, b).mul(a.value(), b.value()), a.modulus()); }

Fe fe_inv(Fe a) {
    if (a.is_zero()) {
        throw Error(ErrorCode::ZeroInverse, "inverse of zero");
    }
    return Fe(powmod(a.value(), a.modulus() - 2, a.modulus()), a.modulus());
}

Fe fe_rand_nonzero(const PrimeField& field, RandomSource& rng) { return field.rand_nonzero(rng); }

void store_le64(std::uint64_t v, std::byte* out) noexcept {
    for (int i = 0; i < 8; ++i) {
        out[i] = static_cast<std::byte>(v >> (8 * i));
    }
}

std::uint64_t load_le64(const std::byte* in) noexcept {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<std::uint64_t>(in[i]) << (8 * i);
    }
    return v;
}

std::array<std::byte, 8> encode_element(Fe a) {
    std::array<std::byte, 8> out{};
    store_le64(a.value(), out.data());
    return out;
}

Fe decode_element(const PrimeField& field, std::span<const std::byte, 8> bytes) {
    return field.from_canonical(load_le64(bytes.data()));
}

std::string to_decimal(const DemoInt& v) { return v.str(); }

DemoInt demo_int_from_decimal(std::string_view text) {
    std::size_t start = (!text.empty() && text.front() == '-') ? 1 : 0;
    if (text.size() == start) {
        throw std::invalid_argument("empty integer literal");
    }
    for (std::size_t i = start; i < text.size(); ++i) {
        if (text[i] < '0' || text[i] > '9') {
            throw std::invalid_argument("bad integer literal: " + std::string(text));
        }
    }
    return DemoInt(std::string(text));
}

} // namespace okmp
