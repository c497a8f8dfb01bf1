#include "okmp/bench.hpp"

#include "okmp/error.hpp"
#include "okmp/wire.hpp"

#include <algorithm>
#include <chrono>

namespace okmp::bench {

namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t elapsed_ns(Clock::time_point start) {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count());
}

/// Median per-call ns of fn over samples batches of inner calls.
template <class Fn>
std::uint64_t sample(unsigned samples, unsigned inner, Fn&& fn) {
    inner = std::max(1u, inner);
    std::vector<std::uint64_t> per_call;
    per_call.reserve(samples);
    for (unsigned s = 0; s < std::max(1u, samples); ++s) {
        const auto start = Clock::now();
        for (unsigned i = 0; i < inner; ++i) {
            fn();
        }
        per_call.push_back(elapsed_ns(start) / inner);
    }
    return median(std::move(per_call));
}

std::string member_name(std::size_t slot) { return "bench" + std::to_string(slot); }

void fill(GroupState& group) {
    for (std::size_t slot = 0; slot < group.capacity(); ++slot) {
        if (!group.occupant(slot)) {
            group.bind(member_name(slot));
        }
    }
}

} // namespace

std::uint64_t median(std::vector<std::uint64_t> samples) {
    if (samples.empty()) {
        return 0;
    }
    const auto mid = samples.begin() + static_cast<std::ptrdiff_t>(samples.size() / 2);
    std::nth_element(samples.begin(), mid, samples.end());
    return *mid;
}

PrimeField bench_field() { return PrimeField(kDefaultPrime, FieldMode::Test); }

std::vector<std::pair<std::size_t, std::size_t>> pairs(const Options& options) {
    const auto& d = options.dims;
    const auto& u = options.users;
    if (d.empty() || u.empty() || (d.size() != u.size() && d.size() != 1 && u.size() != 1)) {
        throw Error(ErrorCode::BadConfig, "dims and users must have equal length, or one of them a single value");
    }
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < std::max(d.size(), u.size()); ++i) {
        const std::size_t m = d[d.size() == 1 ? 0 : i];
        const std::size_t n = u[u.size() == 1 ? 0 : i];
        if (n == 0 || m < n) {
            throw Error(ErrorCode::BadConfig,
                        "need 1 <= users <= dims, got m=" + std::to_string(m) + " n=" + std::to_string(n));
        }
        out.emplace_back(m, n);
    }
    return out;
}

std::uint64_t time_orthogonalization(std::size_t m, std::size_t n, unsigned reps, std::uint64_t seed,
                                     kernels::Backend backend) {
    const PrimeField field = bench_field();
    GenOptions opts;
    opts.backend = backend;
    std::vector<std::uint64_t> samples;
    for (unsigned r = 0; r < std::max(1u, reps); ++r) {
        SeededRandom rng(seed + r);
        const auto start = Clock::now();
        const auto sys = gen_orthogonal_system(field, m, n, rng, opts);
        samples.push_back(elapsed_ns(start));
    }
    return median(std::move(samples));
}

std::uint64_t time_rekey(GroupState& group, unsigned samples, unsigned inner, RandomSource& rng) {
    const Fe s = group.field().rand_nonzero(rng);
    return sample(samples, inner, [&] { group.build_rekey(s); });
}

std::uint64_t time_removal(GroupState& group, unsigned samples, unsigned inner, RandomSource& rng) {
    fill(group);
    const Fe s = group.field().rand_nonzero(rng);
    inner = std::max(1u, inner);
    std::vector<std::uint64_t> per_call;
    std::size_t next = 0;
    for (unsigned k = 0; k < std::max(1u, samples); ++k) {
        std::uint64_t total = 0;
        for (unsigned i = 0; i < inner; ++i) {
            const std::size_t slot = next++ % group.capacity();
            const MemberId id = *group.occupant(slot);
            const auto start = Clock::now();
            group.leave(id, s, rng);
            total += elapsed_ns(start);
            group.bind(id);
        }
        per_call.push_back(total / inner);
    }
    return median(std::move(per_call));
}

std::vector<Row> run(const Options& options) {
    std::vector<Row> rows;
    const PrimeField field = bench_field();
    GenOptions gen;
    gen.backend = options.backend;
    const unsigned heavy_inner = std::max(1u, options.inner / 20);
    for (const auto& [m, n] : pairs(options)) {
        auto emit = [&, m = m, n = n](std::size_t stage, std::uint64_t ns) {
            rows.push_back(Row{std::string(kStages[stage]), m, n, ns});
        };
        emit(0, time_orthogonalization(m, n, options.reps, options.seed, options.backend));

        SeededRandom rng(options.seed);
        GroupState group = GroupState::init(field, n, m, rng, gen);
        fill(group);
        emit(1, time_rekey(group, options.reps, options.inner, rng));

        emit(2, sample(options.reps, heavy_inner, [&] { group.rotate_all(field.rand_nonzero(rng), rng); }));

        std::size_t slot = 0;
        emit(3, sample(options.reps, options.inner, [&] {
                 const auto frame = wire::encode_frame(wire::key_issue_frame(group.issue_key(slot++ % n)));
                 (void)frame;
             }));

        const RekeyMessage msg = group.build_rekey(field.rand_nonzero(rng));
        std::vector<wire::Bytes> outboxes(n);
        emit(4, sample(options.reps, heavy_inner, [&] {
                 const wire::Bytes frame = wire::encode_frame(wire::rekey_frame(msg));
                 for (auto& box : outboxes) {
                     box.assign(frame.begin(), frame.end());
                 }
             }));

        emit(5, time_removal(group, options.reps, options.inner, rng));
    }
    return rows;
}

std::string to_csv(std::span<const Row> rows) {
    std::string out(kCsvHeader);
    out += '\n';
    for (const auto& r : rows) {
        out += r.stage + ',' + std::to_string(r.m) + ',' + std::to_string(r.n) + ',' + std::to_string(r.median_ns) +
               '\n';
    }
    return out;
}

} // namespace okmp::bench
