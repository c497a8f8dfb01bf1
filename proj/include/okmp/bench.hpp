#pragma once

// Stage timings for a group of n members over F_p^m. Stage names follow the
// usual server pipeline: setup of the vector space, rekey, coder generation,
// per-client key setup, broadcast and removal with refresh.

#include "okmp/gkm.hpp"
#include "okmp/kernels.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace okmp::bench {

inline constexpr std::array<std::string_view, 6> kStages{
    "Orthogonalization", "Key Refreshment",      "Generator Coder",
    "Client's setup",    "Bcast", "Client removal + refresh"};

inline constexpr std::string_view kCsvHeader = "stage,m,n,median_ns";

struct Row {
    std::string stage;
    std::size_t m = 0;
    std::size_t n = 0;
    std::uint64_t median_ns = 0;
};

struct Options {
    /// Paired element-wise with users; a single value pairs with every entry
    /// of the other list.
    std::vector<std::size_t> dims{1000};
    std::vector<std::size_t> users{500};
    unsigned reps = 5;
    /// Calls per sample for the stages that take microseconds.
    unsigned inner = 200;
    std::uint64_t seed = 1;
    kernels::Backend backend = kernels::Backend::Parallel;
};

/// (m, n) pairs to run. Throws BadConfig on length mismatch or m < n.
std::vector<std::pair<std::size_t, std::size_t>> pairs(const Options& options);

std::vector<Row> run(const Options& options);
std::string to_csv(std::span<const Row> rows);

std::uint64_t median(std::vector<std::uint64_t> samples);

/// The arithmetic is that of 2^61 - 1, with the m > 2n rule lifted so the
/// timings can cover m <= 2n shapes too.
PrimeField bench_field();

/// Median ns of gen_orthogonal_system over reps runs.
std::uint64_t time_orthogonalization(std::size_t m, std::size_t n, unsigned reps, std::uint64_t seed,
                                     kernels::Backend backend = kernels::Backend::Parallel);

/// Median per-call ns of build_rekey, sampled as samples batches of inner calls.
std::uint64_t time_rekey(GroupState& group, unsigned samples, unsigned inner, RandomSource& rng);

/// Median per-call ns of leave (removal plus the refresh broadcast). Every
/// slot is bound first; the departed slot is re-bound untimed after each call.
std::uint64_t time_removal(GroupState& group, unsigned samples, unsigned inner, RandomSource& rng);

} // namespace okmp::bench
