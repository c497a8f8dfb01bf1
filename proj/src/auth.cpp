#include "okmp/auth.hpp"

#include "okmp/error.hpp"

#include <string>

namespace okmp {

namespace {

// <w, v> <v, v>^{-1}: the scalar t with w = t u, seen through one key.
Fe project(const MemberKey& key, const FVector& w) {
    if (key.norm_inv.is_zero()) {
        throw Error(ErrorCode::IsotropicKey, "key vector is isotropic");
    }
    return key.v.field().mul(inner(w, key.v), key.norm_inv);
}

void require_epoch(std::uint64_t want, std::uint64_t got, const char* what) {
    if (want != got) {
        throw Error(ErrorCode::EpochMismatch, std::string(what) + " is for epoch " +
                                                  std::to_string(got) + ", expected " +
                                                  std::to_string(want));
    }
}

} // namespace

AuthContext AuthContext::from_broadcast(const MemberKey& key, const RekeyMessage& msg) {
    const Fe s = recover_secret(key, msg);
    return AuthContext{key, scale(key.v.field().inv(s), msg.c), msg.epoch};
}

AuthContext AuthContext::from_provisioned(const MemberKey& key) {
    if (!key.aggregate) {
        throw Error(ErrorCode::ParamsRejected, "key was issued without the aggregate");
    }
    return AuthContext{key, *key.aggregate, key.epoch_issued};
}

PendingChallenge make_challenge(const AuthContext& challenger, RandomSource& rng) {
    return make_challenge(challenger, challenger.aggregate.field().rand_nonzero(rng));
}

PendingChallenge make_challenge(const AuthContext& challenger, Fe k) {
    const PrimeField& field = challenger.aggregate.field();
    field.check(k);
    if (k.is_zero()) {
        throw Error(ErrorCode::ParamsRejected, "challenge scalar must be nonzero");
    }
    return {AuthChallenge{challenger.epoch, scale(field.inv(k), challenger.aggregate)}, k};
}

AuthResponse answer_challenge(const AuthContext& responder, const AuthChallenge& challenge) {
    require_epoch(responder.epoch, challenge.epoch, "challenge");
    const Fe k_inv = project(responder.key, challenge.payload);
    if (k_inv.is_zero()) {
        throw Error(ErrorCode::ZeroRecovered, "challenge projects to zero");
    }
    const Fe k = responder.aggregate.field().inv(k_inv);
    return AuthResponse{challenge.epoch, scale(k, responder.aggregate)};
}

bool verify_response(const PendingChallenge& pending, const AuthResponse& response,
                     const AuthContext& verifier) {
    require_epoch(verifier.epoch, pending.challenge.epoch, "challenge");
    require_epoch(verifier.epoch, response.epoch, "response");
    return project(verifier.key, response.payload) == pending.k;
}

} // namespace okmp
