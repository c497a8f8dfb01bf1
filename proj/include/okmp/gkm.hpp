#pragma once

#include "okmp/ffield.hpp"
#include "okmp/ortholin.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace okmp {

using MemberId = std::string;

/// Field operations performed by the most recent state-changing call.
struct OpCounter {
    std::uint64_t scalar_subs = 0;
    std::uint64_t scalar_vector_muls = 0;
    std::uint64_t vector_adds = 0;

    std::uint64_t total() const noexcept { return scalar_subs + scalar_vector_muls + vector_adds; }
    friend bool operator==(const OpCounter&, const OpCounter&) = default;
};

/// Member-side secret: v = x_i e_i plus the cached inverse of <v, v>.
/// Valid for messages whose epoch is at least epoch_issued.
struct MemberKey {
    std::size_t slot = 0;
    FVector v;
    Fe norm_inv;
    std::uint64_t epoch_issued = 0;
    /// Aggregate u at issue time, present when authentication is provisioned.
    std::optional<FVector> aggregate;
};

/// Broadcast c = s * u.
struct RekeyMessage {
    std::uint64_t epoch = 0;
    FVector c;

    friend bool operator==(const RekeyMessage&, const RekeyMessage&) = default;
};

/// Server-side group state. Single writer: callers serialize all mutating
/// calls. Holds the secret orthogonal system, the per-slot scalars x_i and the
/// cached aggregate u = sum_i x_i e_i, which is updated incrementally.
class GroupState {
public:
    /// Fresh system and scalars, all slots free, epoch 0, a random secret.
    /// Protocol-mode fields require dim > 2 * capacity.
    static GroupState init(const PrimeField& field, std::size_t capacity, std::size_t dim,
                           RandomSource& rng, const GenOptions& options = {});

    /// Uses an existing system with fresh random scalars.
    static GroupState with_system(OrthogonalSystem system, RandomSource& rng);

    /// Uses an existing system and explicit nonzero scalars (one per vector).
    static GroupState with_scalars(OrthogonalSystem system, std::span<const Fe> scalars, Fe secret);

    const PrimeField& field() const noexcept { return system_.field(); }
    std::size_t capacity() const noexcept { return system_.count(); }
    std::size_t dim() const noexcept { return system_.dim(); }
    std::uint64_t epoch() const noexcept { return epoch_; }
    Fe current_secret() const noexcept { return secret_; }
    const FVector& aggregate() const noexcept { return aggregate_; }
    const OpCounter& last_ops() const noexcept { return ops_; }
    const OrthogonalSystem& system() const noexcept { return system_; }

    /// Server secret x_i.
    Fe scalar(std::size_t slot) const { return field().element(scalars_.at(slot)); }

    std::optional<MemberId> occupant(std::size_t slot) const { return slots_.at(slot); }
    std::optional<std::size_t> slot_of(const MemberId& id) const;
    std::size_t bound_count() const noexcept { return index_.size(); }
    std::size_t free_count() const noexcept { return free_.size(); }

    /// When set, issued keys carry the aggregate for member authentication.
    void set_provision_aggregate(bool on) noexcept { provision_aggregate_ = on; }

    /// c = s * u; bumps the epoch and makes s current. Throws ZeroSecret.
    RekeyMessage build_rekey(Fe s);
    RekeyMessage rekey(RandomSource& rng) { return build_rekey(field().rand_nonzero(rng)); }

    struct JoinResult {
        MemberKey key;
        RekeyMessage message;
    };

    /// Binds the lowest free slot and broadcasts s. Scalars are unchanged.
    /// Throws GroupFull, DuplicateMember, ZeroSecret.
    JoinResult join(const MemberId& id, Fe s);

    /// Binds a slot without broadcasting; the key is valid from the next epoch.
    MemberKey bind(const MemberId& id);

    /// Re-randomizes the departing slot (x' != x), updates u incrementally,
    /// frees the slot and broadcasts s. Throws UnknownMember, ZeroSecret.
    RekeyMessage leave(const MemberId& id, Fe s, RandomSource& rng);

    /// leave() with a chosen replacement scalar. x' = x is refused outside
    /// test mode.
    RekeyMessage leave_with_scalar(const MemberId& id, Fe new_scalar, Fe s);

    /// Every departure folded into one broadcast. Validates the whole set
    /// before mutating anything.
    RekeyMessage batch_refresh(std::span<const MemberId> departures, Fe s, RandomSource& rng);

    struct BatchResult {
        RekeyMessage message;
        /// One key per arrival, in order, valid from message.epoch.
        std::vector<MemberKey> keys;
    };

    /// Departures first, then arrivals bound into the freed or free slots,
    /// then one broadcast. An id may appear in both lists (it rejoins with a
    /// re-randomized key). Validates everything before mutating; throws
    /// UnknownMember, DuplicateMember, GroupFull, ZeroSecret.
    BatchResult apply_batch(std::span<const MemberId> departures,
                            std::span<const MemberId> arrivals, Fe s, RandomSource& rng);

    /// Resamples every scalar (each differs from its predecessor) and rebuilds
    /// u. Outstanding keys stop working; re-issue with issue_key().
    RekeyMessage rotate_all(Fe s, RandomSource& rng);

    /// Current key for a bound slot, valid from the current epoch.
    MemberKey issue_key(std::size_t slot) const;

    /// Recomputes sum x_i e_i from scratch with the serial reference kernel.
    FVector recompute_aggregate() const;
    bool aggregate_consistent() const { return recompute_aggregate() == aggregate_; }

private:
    GroupState(OrthogonalSystem system, std::vector<std::uint64_t> scalars, Fe secret);

    MemberKey make_key(std::size_t slot, std::uint64_t epoch_issued) const;
    std::size_t occupy(const MemberId& id); // lowest free slot
    void release(std::size_t slot);
    void require_secret(Fe s) const;
    std::size_t require_slot(const MemberId& id) const;
    // u += (x' - x_j) e_j ; x_j = x'
    void replace_scalar(std::size_t slot, std::uint64_t new_scalar);
    std::uint64_t fresh_scalar(std::uint64_t old, RandomSource& rng) const;
    RekeyMessage emit(Fe s);

    OrthogonalSystem system_;
    std::vector<std::uint64_t> scalars_;
    std::vector<std::optional<MemberId>> slots_;
    std::unordered_map<MemberId, std::size_t> index_;
    std::set<std::size_t> free_;
    FVector aggregate_;
    std::vector<std::uint64_t> scratch_;
    std::uint64_t epoch_ = 0;
    Fe secret_;
    OpCounter ops_;
    bool provision_aggregate_ = false;
};

/// h = <c, v>, s = h * <v, v>^{-1}. Throws StaleEpoch for messages older than
/// the key, DimMismatch, IsotropicKey.
Fe recover_secret(const MemberKey& key, const RekeyMessage& msg);

// --- integer demo mode ------------------------------------------------------
// Exact integers reproduce the small real-valued worked example. Over the
// integers s divides the gcd of the broadcast coordinates, so this mode is
// insecure and exists for golden tests and demonstrations only.

struct DemoRekeyMessage {
    std::uint64_t epoch = 0;
    DemoVector c;

    friend bool operator==(const DemoRekeyMessage&, const DemoRekeyMessage&) = default;
};

class DemoGroup {
public:
    /// Throws ParamsRejected unless the basis is orthogonal and anisotropic
    /// and every scalar is nonzero.
    DemoGroup(std::vector<DemoVector> basis, std::vector<DemoInt> scalars);

    /// Random integer orthogonal basis of n vectors in Z^m with small entries
    /// before clearing denominators, and random scalars in [1, 9].
    static DemoGroup random(std::size_t m, std::size_t n, RandomSource& rng);

    std::size_t capacity() const noexcept { return basis_.size(); }
    std::uint64_t epoch() const noexcept { return epoch_; }
    const DemoVector& aggregate() const noexcept { return aggregate_; }
    const std::vector<DemoVector>& basis() const noexcept { return basis_; }
    const DemoInt& scalar(std::size_t slot) const { return scalars_.at(slot); }

    /// v_i = x_i e_i
    DemoVector member_vector(std::size_t slot) const;

    DemoRekeyMessage build_rekey(const DemoInt& s);
    /// Replaces x_slot by new_scalar (must differ and be nonzero), then rekeys.
    DemoRekeyMessage leave(std::size_t slot, const DemoInt& new_scalar, const DemoInt& s);

private:
    std::vector<DemoVector> basis_;
    std::vector<DemoInt> scalars_;
    DemoVector aggregate_;
    std::uint64_t epoch_ = 0;
};

/// <c, v> / <v, v> as an exact rational.
DemoRational recover_secret(const DemoVector& v, const DemoRekeyMessage& msg);

struct GcdLeak {
    DemoInt gcd;
    bool secret_divides;
};

struct GcdLeakReport {
    std::vector<GcdLeak> entries;
    bool all_divide() const noexcept;
};

/// For each integer broadcast, the gcd of its coordinates and whether the
/// matching secret divides it. Throws DimMismatch on length mismatch.
GcdLeakReport gcd_leak_probe(std::span<const DemoRekeyMessage> messages,
                             std::span<const DemoInt> secrets);

/// Gcds are meaningless over F_p; always throws WrongMode.
GcdLeakReport gcd_leak_probe(std::span<const RekeyMessage> messages, std::span<const Fe> secrets);

} // namespace okmp
