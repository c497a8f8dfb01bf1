#include "okmp/gkm.hpp"

#include "okmp/error.hpp"

#include <algorithm>
#include <set>

namespace okmp {

GroupState::GroupState(OrthogonalSystem system, std::vector<std::uint64_t> scalars, Fe secret)
    : system_(std::move(system)), scalars_(std::move(scalars)), slots_(system_.count()),
      aggregate_(system_.field(), system_.dim()), scratch_(system_.dim()), secret_(secret) {
    for (std::size_t i = 0; i < slots_.size(); ++i) {
        free_.insert(free_.end(), i);
    }
    kernels::parallel::weighted_row_sum(field().raw(), system_.rows(), dim(), scalars_,
                                        aggregate_.coords());
}

GroupState GroupState::init(const PrimeField& field, std::size_t capacity, std::size_t dim,
                            RandomSource& rng, const GenOptions& options) {
    return with_system(gen_orthogonal_system(field, dim, capacity, rng, options), rng);
}

GroupState GroupState::with_system(OrthogonalSystem system, RandomSource& rng) {
    const PrimeField field = system.field();
    std::vector<std::uint64_t> scalars(system.count());
    for (auto& x : scalars) {
        x = field.rand_nonzero(rng).value();
    }
    const Fe secret = field.rand_nonzero(rng);
    return GroupState(std::move(system), std::move(scalars), secret);
}

GroupState GroupState::with_scalars(OrthogonalSystem system, std::span<const Fe> scalars,
                                    Fe secret) {
    const PrimeField field = system.field();
    if (scalars.size() != system.count()) {
        throw Error(ErrorCode::DimMismatch, "one scalar per basis vector required");
    }
    std::vector<std::uint64_t> raw;
    raw.reserve(scalars.size());
    for (Fe x : scalars) {
        field.check(x);
        if (x.is_zero()) {
            throw Error(ErrorCode::ParamsRejected, "scalars must be nonzero");
        }
        raw.push_back(x.value());
    }
    field.check(secret);
    if (secret.is_zero()) {
        throw Error(ErrorCode::ZeroSecret, "initial secret is zero");
    }
    return GroupState(std::move(system), std::move(raw), secret);
}

std::optional<std::size_t> GroupState::slot_of(const MemberId& id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

void GroupState::release(std::size_t slot) {
    index_.erase(*slots_[slot]);
    slots_[slot].reset();
    free_.insert(slot);
}

std::size_t GroupState::occupy(const MemberId& id) {
    const std::size_t slot = *free_.begin();
    free_.erase(free_.begin());
    slots_[slot] = id;
    index_.emplace(id, slot);
    return slot;
}

void GroupState::require_secret(Fe s) const {
    field().check(s);
    if (s.is_zero()) {
        throw Error(ErrorCode::ZeroSecret, "secret must be nonzero");
    }
}

std::size_t GroupState::require_slot(const MemberId& id) const {
    auto slot = slot_of(id);
    if (!slot) {
        throw Error(ErrorCode::UnknownMember, "'" + id + "' is not a member");
    }
    return *slot;
}

MemberKey GroupState::make_key(std::size_t slot, std::uint64_t epoch_issued) const {
    const Fe x = scalar(slot);
    FVector v = scale(x, system_.vector(slot));
    // <x e, x e> = x^2 <e, e>
    const Fe norm_inv = field().mul(system_.norm_inv(slot), field().inv(field().mul(x, x)));
    std::optional<FVector> agg;
    if (provision_aggregate_) {
        agg = aggregate_;
    }
    return MemberKey{slot, std::move(v), norm_inv, epoch_issued, std::move(agg)};
}

MemberKey GroupState::issue_key(std::size_t slot) const {
    if (!slots_.at(slot)) {
        throw Error(ErrorCode::UnknownMember, "slot " + std::to_string(slot) + " is free");
    }
    return make_key(slot, epoch_);
}

RekeyMessage GroupState::emit(Fe s) {
    RekeyMessage msg{epoch_ + 1, FVector(field(), dim())};
    kernels::parallel::scale(field().raw(), s.value(), aggregate_.coords(), msg.c.coords());
    ++ops_.scalar_vector_muls;
    epoch_ = msg.epoch;
    secret_ = s;
    return msg;
}

RekeyMessage GroupState::build_rekey(Fe s) {
    require_secret(s);
    ops_ = {};
    return emit(s);
}

MemberKey GroupState::bind(const MemberId& id) {
    if (slot_of(id)) {
        throw Error(ErrorCode::DuplicateMember, "'" + id + "' is already a member");
    }
    if (free_.empty()) {
        throw Error(ErrorCode::GroupFull, "all " + std::to_string(capacity()) + " slots bound");
    }
    return make_key(occupy(id), epoch_ + 1);
}

GroupState::JoinResult GroupState::join(const MemberId& id, Fe s) {
    require_secret(s);
    MemberKey key = bind(id);
    ops_ = {};
    RekeyMessage msg = emit(s);
    return {std::move(key), std::move(msg)};
}

std::uint64_t GroupState::fresh_scalar(std::uint64_t old, RandomSource& rng) const {
    for (;;) {
        const std::uint64_t x = field().rand_nonzero(rng).value();
        if (x != old) {
            return x;
        }
    }
}

void GroupState::replace_scalar(std::size_t slot, std::uint64_t new_scalar) {
    const auto& mod = field().raw();
    const std::uint64_t delta = mod.sub(new_scalar, scalars_[slot]);
    ++ops_.scalar_subs;
    kernels::parallel::scale(mod, delta, system_.row(slot), scratch_);
    ++ops_.scalar_vector_muls;
    kernels::parallel::axpy(mod, 1, scratch_, aggregate_.coords());
    ++ops_.vector_adds;
    scalars_[slot] = new_scalar;
}

RekeyMessage GroupState::leave(const MemberId& id, Fe s, RandomSource& rng) {
    require_secret(s);
    const std::size_t slot = require_slot(id);
    return leave_with_scalar(id, field().element(fresh_scalar(scalars_[slot], rng)), s);
}

RekeyMessage GroupState::leave_with_scalar(const MemberId& id, Fe new_scalar, Fe s) {
    require_secret(s);
    field().check(new_scalar);
    const std::size_t slot = require_slot(id);
    if (new_scalar.is_zero()) {
        throw Error(ErrorCode::ParamsRejected, "replacement scalar must be nonzero");
    }
    if (new_scalar.value() == scalars_[slot] && field().mode() != FieldMode::Test) {
        throw Error(ErrorCode::ParamsRejected, "replacement scalar must differ from the old one");
    }
    ops_ = {};
    replace_scalar(slot, new_scalar.value());
    release(slot);
    return emit(s);
}

RekeyMessage GroupState::batch_refresh(std::span<const MemberId> departures, Fe s,
                                       RandomSource& rng) {
    return apply_batch(departures, {}, s, rng).message;
}

GroupState::BatchResult GroupState::apply_batch(std::span<const MemberId> departures,
                                                std::span<const MemberId> arrivals, Fe s,
                                                RandomSource& rng) {
    require_secret(s);
    std::vector<std::size_t> slots;
    std::set<std::size_t> seen;
    for (const MemberId& id : departures) {
        const std::size_t slot = require_slot(id);
        if (seen.insert(slot).second) {
            slots.push_back(slot);
        }
    }
    std::set<MemberId> incoming;
    for (const MemberId& id : arrivals) {
        const auto bound = slot_of(id);
        if (!incoming.insert(id).second || (bound && !seen.contains(*bound))) {
            throw Error(ErrorCode::DuplicateMember, "'" + id + "' is already a member");
        }
    }
    if (arrivals.size() > free_.size() + slots.size()) {
        throw Error(ErrorCode::GroupFull, "not enough free slots for the batch");
    }
    ops_ = {};
    for (std::size_t slot : slots) {
        replace_scalar(slot, fresh_scalar(scalars_[slot], rng));
        release(slot);
    }
    std::vector<MemberKey> keys;
    for (const MemberId& id : arrivals) {
        keys.push_back(make_key(occupy(id), epoch_ + 1));
    }
    RekeyMessage message = emit(s);
    return {std::move(message), std::move(keys)};
}

RekeyMessage GroupState::rotate_all(Fe s, RandomSource& rng) {
    require_secret(s);
    for (auto& x : scalars_) {
        x = fresh_scalar(x, rng);
    }
    ops_ = {};
    kernels::parallel::weighted_row_sum(field().raw(), system_.rows(), dim(), scalars_,
                                        aggregate_.coords());
    ops_.scalar_vector_muls += capacity();
    ops_.vector_adds += capacity();
    return emit(s);
}

FVector GroupState::recompute_aggregate() const {
    FVector out(field(), dim());
    kernels::serial::weighted_row_sum(field().raw(), system_.rows(), dim(), scalars_,
                                      out.coords());
    return out;
}

Fe recover_secret(const MemberKey& key, const RekeyMessage& msg) {
    if (msg.epoch < key.epoch_issued) {
        throw Error(ErrorCode::StaleEpoch, "message epoch " + std::to_string(msg.epoch) +
                                               " predates key epoch " +
                                               std::to_string(key.epoch_issued));
    }
    if (key.norm_inv.is_zero()) {
        throw Error(ErrorCode::IsotropicKey, "key vector is isotropic");
    }
    const PrimeField& field = key.v.field();
    return field.mul(inner(msg.c, key.v), key.norm_inv);
}

// --- demo mode --------------------------------------------------------------

DemoGroup::DemoGroup(std::vector<DemoVector> basis, std::vector<DemoInt> scalars)
    : basis_(std::move(basis)), scalars_(std::move(scalars)) {
    if (basis_.empty() || basis_.size() != scalars_.size()) {
        throw Error(ErrorCode::ParamsRejected, "need one scalar per basis vector");
    }
    if (!verify_orthogonal(basis_).ok()) {
        throw Error(ErrorCode::ParamsRejected, "demo basis is not orthogonal and anisotropic");
    }
    for (const auto& x : scalars_) {
        if (x == 0) {
            throw Error(ErrorCode::ParamsRejected, "scalars must be nonzero");
        }
    }
    aggregate_ = DemoVector(basis_.front().size(), DemoInt(0));
    for (std::size_t i = 0; i < basis_.size(); ++i) {
        aggregate_ = add(aggregate_, member_vector(i));
    }
}

DemoGroup DemoGroup::random(std::size_t m, std::size_t n, RandomSource& rng) {
    if (n > m || n == 0) {
        throw Error(ErrorCode::DimTooSmall, "need 1 <= n <= m");
    }
    std::vector<DemoVector> basis;
    while (basis.size() < n) {
        std::vector<DemoRational> w(m);
        for (auto& c : w) {
            c = static_cast<long long>(rng.uniform_below(19)) - 9;
        }
        for (const auto& e : basis) {
            DemoRational dot = 0;
            for (std::size_t k = 0; k < m; ++k) {
                dot += w[k] * DemoRational(e[k]);
            }
            const DemoRational coef = dot / DemoRational(inner(e, e));
            for (std::size_t k = 0; k < m; ++k) {
                w[k] -= coef * DemoRational(e[k]);
            }
        }
        DemoInt denom_lcm = 1;
        for (const auto& c : w) {
            denom_lcm = boost::multiprecision::lcm(denom_lcm,
                                                   boost::multiprecision::denominator(c));
        }
        DemoVector v(m);
        DemoInt content = 0;
        for (std::size_t k = 0; k < m; ++k) {
            v[k] = boost::multiprecision::numerator(w[k] * DemoRational(denom_lcm));
            content = boost::multiprecision::gcd(content, v[k]);
        }
        if (content == 0) {
            continue; // candidate was in the span
        }
        for (auto& c : v) {
            c /= content;
        }
        basis.push_back(std::move(v));
    }
    std::vector<DemoInt> scalars(n);
    for (auto& x : scalars) {
        x = static_cast<long long>(1 + rng.uniform_below(9));
    }
    return DemoGroup(std::move(basis), std::move(scalars));
}

DemoVector DemoGroup::member_vector(std::size_t slot) const {
    return scale(scalars_.at(slot), basis_.at(slot));
}

DemoRekeyMessage DemoGroup::build_rekey(const DemoInt& s) {
    if (s == 0) {
        throw Error(ErrorCode::ZeroSecret, "secret must be nonzero");
    }
    ++epoch_;
    return {epoch_, scale(s, aggregate_)};
}

DemoRekeyMessage DemoGroup::leave(std::size_t slot, const DemoInt& new_scalar, const DemoInt& s) {
    if (new_scalar == 0 || new_scalar == scalars_.at(slot)) {
        throw Error(ErrorCode::ParamsRejected, "replacement scalar must be nonzero and new");
    }
    aggregate_ = add(aggregate_, scale(new_scalar - scalars_[slot], basis_[slot]));
    scalars_[slot] = new_scalar;
    return build_rekey(s);
}

DemoRational recover_secret(const DemoVector& v, const DemoRekeyMessage& msg) {
    const DemoInt norm = inner(v, v);
    if (norm == 0) {
        throw Error(ErrorCode::IsotropicKey, "zero key vector");
    }
    return DemoRational(inner(msg.c, v), norm);
}

bool GcdLeakReport::all_divide() const noexcept {
    return std::all_of(entries.begin(), entries.end(),
                       [](const GcdLeak& e) { return e.secret_divides; });
}

GcdLeakReport gcd_leak_probe(std::span<const DemoRekeyMessage> messages,
                             std::span<const DemoInt> secrets) {
    if (messages.size() != secrets.size()) {
        throw Error(ErrorCode::DimMismatch, "one secret per message required");
    }
    GcdLeakReport report;
    for (std::size_t i = 0; i < messages.size(); ++i) {
        DemoInt g = 0;
        for (const auto& c : messages[i].c) {
            g = boost::multiprecision::gcd(g, c);
        }
        const DemoInt s = abs(secrets[i]);
        report.entries.push_back({g, s != 0 && g % s == 0});
    }
    return report;
}

GcdLeakReport gcd_leak_probe(std::span<const RekeyMessage>, std::span<const Fe>) {
    throw Error(ErrorCode::WrongMode, "gcd leakage only applies to integer demo mode");
}

} // namespace okmp
