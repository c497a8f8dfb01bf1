#pragma once

// Executable attack narratives against the protocol. Each attack sees only
// what its attacker would see; ground truth is passed as a sealed handle that
// can answer equality questions and nothing else.

#include "okmp/ffield.hpp"
#include "okmp/gkm.hpp"
#include "okmp/ortholin.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace okmp {

/// The server's current secret, queryable only by comparison.
class SealedSecret {
public:
    static SealedSecret of(const GroupState& state) { return SealedSecret(state.current_secret()); }
    static SealedSecret of(Fe s) { return SealedSecret(s); }
    bool matches(Fe candidate) const { return candidate == secret_; }

private:
    explicit SealedSecret(Fe s) : secret_(s) {}
    Fe secret_;
};

/// The server's current scalars, queryable only by comparison.
class SealedScalars {
public:
    static SealedScalars of(const GroupState& state);
    bool matches(std::span<const Fe> candidate) const;

private:
    explicit SealedScalars(std::vector<Fe> x) : scalars_(std::move(x)) {}
    std::vector<Fe> scalars_;
};

/// Ordered broadcasts as seen on the wire, plus optional side knowledge.
struct Transcript {
    std::vector<RekeyMessage> messages;
    struct KnownPair {
        Fe s;
        RekeyMessage message;
    };
    std::optional<KnownPair> known_pair;

    /// Throws ParamsRejected unless epochs are distinct and increasing.
    void validate() const;
};

/// Drives a group through the traffic a passive observer would record: every
/// slot joins, one rekey, then capacity - 1 members leave one at a time. The
/// last broadcast becomes the known (s, c) pair. Requires an empty group.
Transcript observe_churn(GroupState& state, RandomSource& rng);

// --- old member -------------------------------------------------------------

struct OldMemberVerdict {
    Fe recovered;
    bool succeeded; // recovered equals the true secret
};

/// A revoked member decodes a later broadcast with its stale key.
OldMemberVerdict attack_old_member(const MemberKey& old_key, const RekeyMessage& msg,
                                   const SealedSecret& truth);

struct DemoOldMemberVerdict {
    DemoRational recovered;
    bool succeeded;
};

DemoOldMemberVerdict attack_old_member(const DemoVector& old_v, const DemoRekeyMessage& msg,
                                       const DemoInt& true_secret);

// --- rekey difference --------------------------------------------------------

struct DifferenceVerdict {
    /// <c_before - c_after, v>
    Fe projection;
    bool zero_difference;
    /// Nonzero candidates for the new secret that the search covered.
    std::uint64_t candidates = 0;
    /// Candidates for which some (x, x', <e, e>) consistent with the
    /// attacker's view reproduces the observation.
    std::uint64_t explainable = 0;
    std::vector<Fe> unexplained;
    /// The true secret is among the explainable candidates.
    bool truth_explainable = false;

    bool no_information() const noexcept { return explainable == candidates; }
};

struct DifferenceOptions {
    /// Restrict witnesses to x' != x, as the protocol enforces.
    bool distinct_scalars = true;
    /// Exhaustive search bound; larger fields throw ParamsRejected.
    std::uint64_t max_prime = 1u << 12;
};

/// A member present for msg_before (and revoked for msg_after) tries to pin
/// down the new secret from the difference of the two broadcasts.
DifferenceVerdict attack_difference(const MemberKey& old_key, const RekeyMessage& msg_before,
                                    const RekeyMessage& msg_after, const SealedSecret& truth,
                                    const DifferenceOptions& options = {});

// --- basis recovery -----------------------------------------------------------

struct BasisRecoveryVerdict {
    std::size_t rank = 0;
    /// Coordinates of the known aggregate s^{-1} c in the hypothesised basis.
    std::vector<Fe> recovered_scalars;
    bool succeeded = false; // recovered_scalars equal the server's scalars
};

/// Stacks the n = m observed broadcasts into a matrix, requires it to be
/// invertible, then reads the scalars off the known (s, c) pair in the
/// hypothesised basis. nullopt hypothesises the canonical basis, which is
/// what an attacker assumes without side knowledge. Throws
/// SingularTranscript when the broadcasts do not span the space,
/// ParamsRejected without a known pair, DimMismatch.
BasisRecoveryVerdict attack_basis_recovery(const Transcript& transcript,
                                           const std::optional<OrthogonalSystem>& hypothesis,
                                           const SealedScalars& truth);

/// Rank of a k x m matrix over F_p (Gauss-Jordan).
std::size_t matrix_rank(const PrimeField& field, std::size_t m, std::vector<std::uint64_t> rows);

/// Inverse of an m x m matrix; throws SingularTranscript.
std::vector<std::uint64_t> matrix_inverse(const PrimeField& field, std::size_t m,
                                          std::vector<std::uint64_t> rows);

// --- brute force ------------------------------------------------------------

struct BruteForceBound {
    double log2_work;
    bool infeasible; // above kSecurityBits
};

BruteForceBound brute_force_bound_check(const PrimeField& field, std::size_t n);

} // namespace okmp
