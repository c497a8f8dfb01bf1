#include "okmp/random.hpp"

#include <openssl/rand.h>

#include <cstdlib>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>

namespace okmp {

std::uint64_t RandomSource::uniform_below(std::uint64_t bound) {
    if (bound == 0) {
        throw std::invalid_argument("uniform_below: zero bound");
    }
    // Reject the top partial bucket so every residue is equally likely.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    for (;;) {
        const std::uint64_t word = next_u64();
        if (word < limit) {
            return word % bound;
        }
    }
}

std::uint64_t SystemRandom::next_u64() {
    unsigned char buf[8];
    if (RAND_bytes(buf, sizeof buf) != 1) {
        throw std::runtime_error("RAND_bytes failed");
    }
    std::uint64_t out;
    std::memcpy(&out, buf, sizeof out);
    return out;
}

std::unique_ptr<RandomSource> make_random(std::optional<std::uint64_t> seed) {
    if (seed) {
        return std::make_unique<SeededRandom>(*seed);
    }
    return std::make_unique<SystemRandom>();
}

std::optional<std::uint64_t> seed_from_env() {
    const char* raw = std::getenv("OKMP_SEED");
    if (raw == nullptr || *raw == '\0') {
        return std::nullopt;
    }
    try {
        return std::stoull(raw, nullptr, 0);
    } catch (const std::exception&) {
        throw std::invalid_argument(std::string("OKMP_SEED is not an integer: ") + raw);
    }
}

} // namespace okmp
