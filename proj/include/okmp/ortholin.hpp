#pragma once

#include "okmp/ffield.hpp"
#include "okmp/kernels.hpp"

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace okmp {

/// Dense vector over F_p.
class FVector {
public:
    /// Zero vector of the given dimension.
    FVector(const PrimeField& field, std::size_t dim);
    /// Takes canonical residues; throws NonCanonical otherwise.
    FVector(const PrimeField& field, std::vector<std::uint64_t> coords);

    /// Signed literals reduced into the field, e.g. {1, -2, 1}.
    static FVector from_signed(const PrimeField& field, std::initializer_list<std::int64_t> coords);

    const PrimeField& field() const noexcept { return field_; }
    std::size_t dim() const noexcept { return coords_.size(); }

    std::span<const std::uint64_t> coords() const noexcept { return coords_; }
    std::span<std::uint64_t> coords() noexcept { return coords_; }

    Fe at(std::size_t i) const { return field_.element(coords_.at(i)); }
    void set(std::size_t i, Fe v);

    bool is_zero() const noexcept;
    std::size_t nonzero_count() const noexcept;

    friend bool operator==(const FVector& a, const FVector& b) noexcept {
        return a.field_ == b.field_ && a.coords_ == b.coords_;
    }

private:
    PrimeField field_;
    std::vector<std::uint64_t> coords_;
};

/// The standard symmetric bilinear form sum_k a_k b_k.
Fe inner(const FVector& a, const FVector& b);

FVector add(const FVector& a, const FVector& b);
FVector sub(const FVector& a, const FVector& b);
FVector scale(Fe alpha, const FVector& a);

/// Integer vectors for the insecure worked-example mode.
using DemoVector = std::vector<DemoInt>;

DemoInt inner(const DemoVector& a, const DemoVector& b);
DemoVector add(const DemoVector& a, const DemoVector& b);
DemoVector scale(const DemoInt& alpha, const DemoVector& a);

/// n mutually orthogonal anisotropic vectors in F_p^m, stored row-major, with
/// cached norms <e_i, e_i> and their inverses. This is server secret material.
class OrthogonalSystem {
public:
    /// Wraps arbitrary vectors without checking orthogonality; use
    /// verify_orthogonal on the result. All vectors must share field and dim.
    static OrthogonalSystem from_vectors(const PrimeField& field, std::span<const FVector> vectors);
    /// Same, from a row-major n x m residue matrix.
    static OrthogonalSystem from_rows(const PrimeField& field, std::size_t m,
                                      std::vector<std::uint64_t> rows);

    /// The first n standard basis vectors. This is the misconfiguration the
    /// basis-recovery attack breaks; test mode only.
    static OrthogonalSystem canonical(const PrimeField& field, std::size_t m, std::size_t n);

    const PrimeField& field() const noexcept { return field_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t count() const noexcept { return norms_.size(); }

    std::span<const std::uint64_t> rows() const noexcept { return basis_; }
    std::span<const std::uint64_t> row(std::size_t i) const {
        return std::span<const std::uint64_t>(basis_).subspan(i * dim_, dim_);
    }
    FVector vector(std::size_t i) const;

    Fe norm(std::size_t i) const { return field_.element(norms_.at(i)); }
    /// Throws IsotropicKey if <e_i, e_i> = 0.
    Fe norm_inv(std::size_t i) const;

    /// First k vectors as a system of their own.
    OrthogonalSystem prefix(std::size_t k) const;

    /// Header (p: u64, m: u32, n: u32) then n*m elements, all little-endian.
    std::vector<std::byte> export_bytes() const;
    static OrthogonalSystem import_bytes(std::span<const std::byte> bytes, FieldMode mode);

    friend bool operator==(const OrthogonalSystem& a, const OrthogonalSystem& b) noexcept {
        return a.field_ == b.field_ && a.dim_ == b.dim_ && a.basis_ == b.basis_;
    }

private:
    OrthogonalSystem(const PrimeField& field, std::size_t dim, std::vector<std::uint64_t> basis);

    PrimeField field_;
    std::size_t dim_;
    std::vector<std::uint64_t> basis_;
    std::vector<std::uint64_t> norms_;
    std::vector<std::uint64_t> norm_invs_; // 0 where the norm is 0
};

struct GenOptions {
    kernels::Backend backend = kernels::Backend::Parallel;
    /// Fresh candidates tried per slot before giving up on the attempt.
    unsigned resamples_per_slot = 64;
    /// Full restarts after a slot is exhausted (only ever needed at tiny p,
    /// where the last complement direction can be isotropic).
    unsigned restarts = 8;
    /// Candidates projected together against the accepted rows.
    std::size_t block = 16;
};

/// Randomized Gram-Schmidt: draw dense candidates, project out the accepted
/// vectors using cached inverse norms, keep a candidate iff it is anisotropic
/// and has at least two nonzero coordinates. Deterministic in the rng stream
/// for fixed options; both backends produce identical systems.
OrthogonalSystem gen_orthogonal_system(const PrimeField& field, std::size_t m, std::size_t n,
                                       RandomSource& rng, const GenOptions& options = {});

struct OrthogonalityReport {
    std::vector<std::pair<std::size_t, std::size_t>> non_orthogonal; // i < j, 0-based
    std::vector<std::size_t> isotropic;
    bool ok() const noexcept { return non_orthogonal.empty() && isotropic.empty(); }
};

/// Full O(n^2) pairwise check.
OrthogonalityReport verify_orthogonal(const OrthogonalSystem& system);
OrthogonalityReport verify_orthogonal(std::span<const DemoVector> system);

/// log2 of q^{(3/2) n^2} / n!, the count of orthogonal n-tuples used as a
/// brute-force work estimate. The (1 + o(1)) factor is dropped.
double tuple_count_log2(std::uint64_t q, std::size_t n);

inline constexpr double kSecurityBits = 128.0;

struct ParamAdvice {
    std::size_t dim;
    double security_log2;
    std::vector<std::string> warnings;
};

/// Recommends m = 2n + 1 and flags weak parameters.
ParamAdvice advise_params(std::size_t n, const PrimeField& field);

} // namespace okmp
