#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>

namespace okmp {

/// Source of uniform 64-bit words. Instances are not thread-safe; give each
/// concurrent caller its own.
class RandomSource {
public:
    virtual ~RandomSource() = default;

    virtual std::uint64_t next_u64() = 0;

    /// True for seeded generators that replay identically.
    virtual bool deterministic() const noexcept = 0;

    /// Uniform draw from [0, bound). bound must be nonzero.
    std::uint64_t uniform_below(std::uint64_t bound);
};

/// Reproducible generator for tests and simulations. Not for protocol use.
class SeededRandom final : public RandomSource {
public:
    explicit SeededRandom(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() override { return engine_(); }
    bool deterministic() const noexcept override { return true; }

private:
    std::mt19937_64 engine_;
};

/// OS-backed cryptographically strong generator (OpenSSL RAND_bytes).
class SystemRandom final : public RandomSource {
public:
    std::uint64_t next_u64() override;
    bool deterministic() const noexcept override { return false; }
};

/// Seeded generator when a seed is given, system generator otherwise.
std::unique_ptr<RandomSource> make_random(std::optional<std::uint64_t> seed);

/// Parses OKMP_SEED from the environment, if set.
std::optional<std::uint64_t> seed_from_env();

} // namespace okmp
