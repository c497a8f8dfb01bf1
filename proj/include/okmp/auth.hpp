#pragma once

// Member-to-member challenge and response over the group aggregate u.
// The challenger sends k^{-1} u, the responder recovers k^{-1} with its key
// and returns k u, the challenger recovers k the same way and compares.
// Everything is bound to the epoch of the aggregate it was built from.

#include "okmp/ffield.hpp"
#include "okmp/gkm.hpp"
#include "okmp/ortholin.hpp"
#include "okmp/random.hpp"

#include <cstdint>

namespace okmp {

/// A member key together with the aggregate it authenticates against.
struct AuthContext {
    MemberKey key;
    FVector aggregate;
    std::uint64_t epoch = 0;

    /// u = s^{-1} c, where s is what the key recovers from the broadcast.
    static AuthContext from_broadcast(const MemberKey& key, const RekeyMessage& msg);
    /// Uses the aggregate shipped with the key. Throws ParamsRejected if absent.
    static AuthContext from_provisioned(const MemberKey& key);
};

struct AuthChallenge {
    std::uint64_t epoch = 0;
    FVector payload; // k^{-1} u

    friend bool operator==(const AuthChallenge&, const AuthChallenge&) = default;
};

struct AuthResponse {
    std::uint64_t epoch = 0;
    FVector payload; // k u

    friend bool operator==(const AuthResponse&, const AuthResponse&) = default;
};

/// Challenge plus the k that only the challenger keeps.
struct PendingChallenge {
    AuthChallenge challenge;
    Fe k;
};

PendingChallenge make_challenge(const AuthContext& challenger, RandomSource& rng);
/// Explicit k; throws ParamsRejected when k = 0.
PendingChallenge make_challenge(const AuthContext& challenger, Fe k);

/// Throws EpochMismatch when the challenge is for another epoch,
/// ZeroRecovered when the payload projects to zero, IsotropicKey.
AuthResponse answer_challenge(const AuthContext& responder, const AuthChallenge& challenge);

/// Accepts iff the k recovered from the response equals the retained k.
/// Throws EpochMismatch unless challenge, response and verifier share an epoch.
bool verify_response(const PendingChallenge& pending, const AuthResponse& response,
                     const AuthContext& verifier);

} // namespace okmp
