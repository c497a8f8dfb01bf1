#pragma once

#include "okmp/kernels.hpp"
#include "okmp/random.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

namespace okmp {

inline constexpr std::uint64_t kDefaultPrime = kernels::kMersenne61;

/// Smallest modulus accepted in protocol mode.
inline constexpr std::uint64_t kProtocolPrimeFloor = std::uint64_t{1} << 31;

/// Protocol mode enforces the security floors (p >= 2^31, m > 2n). Test mode
/// relaxes them so toy fields like F_7 can be exercised.
enum class FieldMode { Protocol, Test };

/// Deterministic Miller-Rabin, exact for every 64-bit input.
bool is_prime_u64(std::uint64_t n);

/// Canonical residue tagged with its modulus.
class Fe {
public:
    constexpr Fe() = default;

    constexpr std::uint64_t value() const noexcept { return value_; }
    constexpr std::uint64_t modulus() const noexcept { return modulus_; }
    constexpr bool is_zero() const noexcept { return value_ == 0; }

    friend constexpr bool operator==(const Fe&, const Fe&) = default;

private:
    friend class PrimeField;
    friend Fe fe_add(Fe, Fe);
    friend Fe fe_sub(Fe, Fe);
    friend Fe fe_mul(Fe, Fe);
    friend Fe fe_inv(Fe);
    constexpr Fe(std::uint64_t value, std::uint64_t modulus) : value_(value), modulus_(modulus) {}

    std::uint64_t value_ = 0;
    std::uint64_t modulus_ = 0;
};

/// The prime field F_p.
class PrimeField {
public:
    explicit PrimeField(std::uint64_t p = kDefaultPrime, FieldMode mode = FieldMode::Protocol);

    static PrimeField testing(std::uint64_t p) { return PrimeField(p, FieldMode::Test); }

    std::uint64_t modulus() const noexcept { return mod_.p; }
    const kernels::Modulus& raw() const noexcept { return mod_; }
    FieldMode mode() const noexcept { return mode_; }

    /// Bit-length C of one serialized element. Residues always travel as
    /// 8-byte words, so this is 64 for every supported modulus.
    unsigned elem_bits() const noexcept { return 64; }

    /// Bit-length of p itself.
    unsigned modulus_bits() const noexcept;

    Fe zero() const noexcept { return Fe(0, mod_.p); }
    Fe one() const noexcept { return Fe(1, mod_.p); }

    /// Reduces any 64-bit value.
    Fe element(std::uint64_t v) const noexcept { return Fe(v % mod_.p, mod_.p); }
    Fe from_signed(std::int64_t v) const noexcept;

    /// Rejects v >= p with NonCanonical.
    Fe from_canonical(std::uint64_t v) const;

    Fe add(Fe a, Fe b) const;
    Fe sub(Fe a, Fe b) const;
    Fe mul(Fe a, Fe b) const;
    Fe neg(Fe a) const;
    Fe pow(Fe a, std::uint64_t e) const;

    /// Multiplicative inverse as a^(p-2). Throws ZeroInverse for 0.
    Fe inv(Fe a) const;

    /// Uniform on [1, p).
    Fe rand_nonzero(RandomSource& rng) const;
    /// Uniform on [0, p).
    Fe rand(RandomSource& rng) const;

    /// Throws FieldMismatch unless a belongs to this field.
    void check(Fe a) const;

    friend bool operator==(const PrimeField& a, const PrimeField& b) noexcept {
        return a.mod_.p == b.mod_.p;
    }

private:
    kernels::Modulus mod_;
    FieldMode mode_;
};

Fe fe_add(Fe a, Fe b);
Fe fe_sub(Fe a, Fe b);
Fe fe_mul(Fe a, Fe b);
Fe fe_inv(Fe a);
Fe fe_rand_nonzero(const PrimeField& field, RandomSource& rng);

/// 8-byte little-endian canonical residue.
std::array<std::byte, 8> encode_element(Fe a);
Fe decode_element(const PrimeField& field, std::span<const std::byte, 8> bytes);

void store_le64(std::uint64_t v, std::byte* out) noexcept;
std::uint64_t load_le64(const std::byte* in) noexcept;

// Exact integers for reproducing the worked real-valued example. Integer
// coordinates leak the secret through gcds, so this mode is insecure and
// must never carry real traffic.
using DemoInt = boost::multiprecision::cpp_int;
using DemoRational = boost::multiprecision::cpp_rational;

std::string to_decimal(const DemoInt& v);
/// Throws std::invalid_argument on anything but an optional '-' and digits.
DemoInt demo_int_from_decimal(std::string_view text);

} // namespace okmp
