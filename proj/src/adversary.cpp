#include "okmp/adversary.hpp"

#include "okmp/error.hpp"

#include <algorithm>

namespace okmp {

SealedScalars SealedScalars::of(const GroupState& state) {
    std::vector<Fe> x;
    x.reserve(state.capacity());
    for (std::size_t i = 0; i < state.capacity(); ++i) {
        x.push_back(state.scalar(i));
    }
    return SealedScalars(std::move(x));
}

bool SealedScalars::matches(std::span<const Fe> candidate) const {
    return std::equal(candidate.begin(), candidate.end(), scalars_.begin(), scalars_.end());
}

void Transcript::validate() const {
    for (std::size_t i = 1; i < messages.size(); ++i) {
        if (messages[i].epoch <= messages[i - 1].epoch) {
            throw Error(ErrorCode::ParamsRejected, "transcript epochs must increase");
        }
    }
}

Transcript observe_churn(GroupState& state, RandomSource& rng) {
    if (state.bound_count() != 0) {
        throw Error(ErrorCode::ParamsRejected, "observe_churn needs an empty group");
    }
    const PrimeField& f = state.field();
    for (std::size_t i = 0; i < state.capacity(); ++i) {
        state.join("observed-" + std::to_string(i), f.rand_nonzero(rng));
    }
    Transcript t;
    t.messages.push_back(state.rekey(rng));
    for (std::size_t i = 0; i + 1 < state.capacity(); ++i) {
        t.messages.push_back(state.leave("observed-" + std::to_string(i), f.rand_nonzero(rng), rng));
    }
    t.known_pair = Transcript::KnownPair{state.current_secret(), t.messages.back()};
    return t;
}

OldMemberVerdict attack_old_member(const MemberKey& old_key, const RekeyMessage& msg,
                                   const SealedSecret& truth) {
    const Fe recovered = recover_secret(old_key, msg);
    return {recovered, truth.matches(recovered)};
}

DemoOldMemberVerdict attack_old_member(const DemoVector& old_v, const DemoRekeyMessage& msg,
                                       const DemoInt& true_secret) {
    const DemoRational recovered = recover_secret(old_v, msg);
    return {recovered, recovered == DemoRational(true_secret)};
}

DifferenceVerdict attack_difference(const MemberKey& old_key, const RekeyMessage& msg_before,
                                    const RekeyMessage& msg_after, const SealedSecret& truth,
                                    const DifferenceOptions& options) {
    const PrimeField& f = old_key.v.field();
    const std::uint64_t p = f.modulus();
    if (p > options.max_prime) {
        throw Error(ErrorCode::ParamsRejected, "witness search needs a small field");
    }
    // Everything the attacker knows: v, K = <v, v>, the earlier secret s, and
    // the projection d of the difference onto v.
    const Fe s = recover_secret(old_key, msg_before);
    const Fe k_norm_inv = old_key.norm_inv;
    const Fe d = inner(sub(msg_before.c, msg_after.c), old_key.v);

    DifferenceVerdict verdict;
    verdict.projection = d;
    verdict.zero_difference = msg_before.c == msg_after.c;
    // d = s K - sigma x' x N with N = K / x^2, so sigma = (s K - d) / K * x / x'.
    const Fe target = f.mul(f.sub(f.mul(s, f.inv(k_norm_inv)), d), k_norm_inv);

    std::vector<std::uint64_t> inverse(p, 0);
    for (std::uint64_t a = 1; a < p; ++a) {
        inverse[a] = f.inv(f.element(a)).value();
    }
    std::vector<bool> hit(p, false);
    const auto& mod = f.raw();
    for (std::uint64_t x = 1; x < p; ++x) {
        const std::uint64_t tx = mod.mul(target.value(), x);
        for (std::uint64_t x_new = 1; x_new < p; ++x_new) {
            if (options.distinct_scalars && x_new == x) {
                continue;
            }
            hit[mod.mul(tx, inverse[x_new])] = true;
        }
    }
    verdict.candidates = p - 1;
    for (std::uint64_t sigma = 1; sigma < p; ++sigma) {
        if (hit[sigma]) {
            ++verdict.explainable;
            verdict.truth_explainable |= truth.matches(f.element(sigma));
        } else {
            verdict.unexplained.push_back(f.element(sigma));
        }
    }
    return verdict;
}

namespace {

// Row-reduces in place; returns the pivot count. When `augment` is non-null
// it receives the same row operations.
std::size_t gauss_jordan(const PrimeField& f, std::size_t cols, std::vector<std::uint64_t>& a,
                         std::vector<std::uint64_t>* augment) {
    const auto& mod = f.raw();
    const std::size_t rows = a.size() / cols;
    std::size_t rank = 0;
    for (std::size_t col = 0; col < cols && rank < rows; ++col) {
        std::size_t pivot = rank;
        while (pivot < rows && a[pivot * cols + col] == 0) {
            ++pivot;
        }
        if (pivot == rows) {
            continue;
        }
        auto swap_rows = [&](std::vector<std::uint64_t>& m, std::size_t width) {
            std::swap_ranges(m.begin() + static_cast<std::ptrdiff_t>(pivot * width),
                             m.begin() + static_cast<std::ptrdiff_t>((pivot + 1) * width),
                             m.begin() + static_cast<std::ptrdiff_t>(rank * width));
        };
        swap_rows(a, cols);
        if (augment) {
            swap_rows(*augment, cols);
        }
        const std::uint64_t inv = f.inv(f.element(a[rank * cols + col])).value();
        for (std::size_t k = 0; k < cols; ++k) {
            a[rank * cols + k] = mod.mul(a[rank * cols + k], inv);
            if (augment) {
                (*augment)[rank * cols + k] = mod.mul((*augment)[rank * cols + k], inv);
            }
        }
        for (std::size_t r = 0; r < rows; ++r) {
            const std::uint64_t factor = a[r * cols + col];
            if (r == rank || factor == 0) {
                continue;
            }
            for (std::size_t k = 0; k < cols; ++k) {
                a[r * cols + k] = mod.sub(a[r * cols + k], mod.mul(factor, a[rank * cols + k]));
                if (augment) {
                    (*augment)[r * cols + k] =
                        mod.sub((*augment)[r * cols + k], mod.mul(factor, (*augment)[rank * cols + k]));
                }
            }
        }
        ++rank;
    }
    return rank;
}

} // namespace

std::size_t matrix_rank(const PrimeField& field, std::size_t m, std::vector<std::uint64_t> rows) {
    if (m == 0 || rows.size() % m != 0) {
        throw Error(ErrorCode::DimMismatch, "matrix storage is not a multiple of the width");
    }
    return gauss_jordan(field, m, rows, nullptr);
}

std::vector<std::uint64_t> matrix_inverse(const PrimeField& field, std::size_t m,
                                          std::vector<std::uint64_t> rows) {
    if (m == 0 || rows.size() != m * m) {
        throw Error(ErrorCode::DimMismatch, "inverse needs a square matrix");
    }
    std::vector<std::uint64_t> inv(m * m, 0);
    for (std::size_t i = 0; i < m; ++i) {
        inv[i * m + i] = 1;
    }
    if (gauss_jordan(field, m, rows, &inv) != m) {
        throw Error(ErrorCode::SingularTranscript, "matrix is singular");
    }
    return inv;
}

BasisRecoveryVerdict attack_basis_recovery(const Transcript& transcript,
                                           const std::optional<OrthogonalSystem>& hypothesis,
                                           const SealedScalars& truth) {
    transcript.validate();
    if (!transcript.known_pair) {
        throw Error(ErrorCode::ParamsRejected, "basis recovery needs one known (s, c) pair");
    }
    const auto& known = *transcript.known_pair;
    const PrimeField& f = known.message.c.field();
    const std::size_t m = known.message.c.dim();

    std::vector<std::uint64_t> observed;
    for (const auto& msg : transcript.messages) {
        if (msg.c.dim() != m || !(msg.c.field() == f)) {
            throw Error(ErrorCode::DimMismatch, "transcript mixes dimensions or fields");
        }
        observed.insert(observed.end(), msg.c.coords().begin(), msg.c.coords().end());
    }
    BasisRecoveryVerdict verdict;
    verdict.rank = observed.empty() ? 0 : matrix_rank(f, m, observed);
    if (verdict.rank < m) {
        throw Error(ErrorCode::SingularTranscript,
                    "broadcasts span rank " + std::to_string(verdict.rank) + " < " +
                        std::to_string(m));
    }

    // The aggregate u = s^{-1} c, then its coordinates a with a H = u.
    const FVector aggregate = scale(f.inv(known.s), known.message.c);
    if (!hypothesis) {
        for (std::size_t j = 0; j < m; ++j) {
            verdict.recovered_scalars.push_back(aggregate.at(j));
        }
    } else {
        if (hypothesis->count() != m || hypothesis->dim() != m) {
            throw Error(ErrorCode::DimMismatch, "hypothesised basis must be m x m");
        }
        const auto h_inv = matrix_inverse(
            f, m, std::vector<std::uint64_t>(hypothesis->rows().begin(), hypothesis->rows().end()));
        const auto& mod = f.raw();
        for (std::size_t j = 0; j < m; ++j) {
            std::uint64_t acc = 0;
            for (std::size_t k = 0; k < m; ++k) {
                acc = mod.add(acc, mod.mul(aggregate.coords()[k], h_inv[k * m + j]));
            }
            verdict.recovered_scalars.push_back(f.element(acc));
        }
    }
    verdict.succeeded = truth.matches(verdict.recovered_scalars);
    return verdict;
}

BruteForceBound brute_force_bound_check(const PrimeField& field, std::size_t n) {
    const double work = tuple_count_log2(field.modulus(), n);
    return {work, work >= kSecurityBits};
}

} // namespace okmp
