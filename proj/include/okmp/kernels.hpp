#pragma once

// Residue-level vector kernels over F_p.
//
// Two implementations share one interface:
//   serial::   straightforward loops with a full modular reduction per term.
//              Kept as the reference the optimized path is tested against.
//   parallel:: OpenMP loops with lazy reduction and cache blocking. This is
//              what the protocol code calls.
// Arithmetic is exact, so both must agree bit for bit regardless of thread
// count or summation order.
//
// Matrices are row-major, rows contiguous; a k x m matrix is a span of k*m.

#include <cstddef>
#include <cstdint>
#include <span>

namespace okmp::kernels {

inline constexpr std::uint64_t kMersenne61 = (std::uint64_t{1} << 61) - 1;

__extension__ typedef unsigned __int128 u128;

struct Modulus {
    std::uint64_t p = kMersenne61;
    bool mersenne61 = true;

    constexpr Modulus() = default;
    constexpr explicit Modulus(std::uint64_t modulus)
        : p(modulus), mersenne61(modulus == kMersenne61) {}

    constexpr std::uint64_t add(std::uint64_t a, std::uint64_t b) const {
        const std::uint64_t s = a + b;
        return (s < a || s >= p) ? s - p : s;
    }

    constexpr std::uint64_t sub(std::uint64_t a, std::uint64_t b) const {
        return a >= b ? a - b : a - b + p;
    }

    constexpr std::uint64_t neg(std::uint64_t a) const { return a == 0 ? 0 : p - a; }

    constexpr std::uint64_t mul(std::uint64_t a, std::uint64_t b) const {
        const u128 prod = static_cast<u128>(a) * b;
        if (mersenne61) {
            return reduce_m61(prod);
        }
        return static_cast<std::uint64_t>(prod % p);
    }

    /// Full reduction of any 128-bit value modulo 2^61 - 1.
    static constexpr std::uint64_t reduce_m61(u128 x) {
        x = (x & kMersenne61) + (x >> 61);
        x = (x & kMersenne61) + (x >> 61);
        auto r = static_cast<std::uint64_t>(x);
        r = (r & kMersenne61) + (r >> 61);
        return r >= kMersenne61 ? r - kMersenne61 : r;
    }

    /// Partial fold of a product of two residues mod 2^61 - 1; result < 2^62.
    static constexpr std::uint64_t fold_m61(u128 prod) {
        return static_cast<std::uint64_t>(prod & kMersenne61) +
               static_cast<std::uint64_t>(prod >> 61);
    }

    /// Reduce an arbitrary 128-bit accumulator.
    constexpr std::uint64_t reduce(u128 x) const {
        return mersenne61 ? reduce_m61(x) : static_cast<std::uint64_t>(x % p);
    }
};

enum class Backend { Serial, Parallel };

namespace serial {

std::uint64_t dot(const Modulus& mod, std::span<const std::uint64_t> a,
                  std::span<const std::uint64_t> b);

/// out = alpha * x
void scale(const Modulus& mod, std::uint64_t alpha, std::span<const std::uint64_t> x,
           std::span<std::uint64_t> out);

/// y += alpha * x
void axpy(const Modulus& mod, std::uint64_t alpha, std::span<const std::uint64_t> x,
          std::span<std::uint64_t> y);

/// out = sum_i weights[i] * rows[i]   (rows: n x m)
void weighted_row_sum(const Modulus& mod, std::span<const std::uint64_t> rows, std::size_t m,
                      std::span<const std::uint64_t> weights, std::span<std::uint64_t> out);

/// gram[t*k + j] = <targets[t], rows[j]>   (rows: k x m, targets: b x m)
void cross_dots(const Modulus& mod, std::span<const std::uint64_t> rows,
                std::span<const std::uint64_t> targets, std::size_t m,
                std::span<std::uint64_t> gram);

/// targets[t] -= sum_j coefs[t*k + j] * rows[j]
void subtract_combination(const Modulus& mod, std::span<const std::uint64_t> rows,
                          std::span<const std::uint64_t> coefs, std::size_t m,
                          std::span<std::uint64_t> targets);

} // namespace serial

namespace parallel {

std::uint64_t dot(const Modulus& mod, std::span<const std::uint64_t> a,
                  std::span<const std::uint64_t> b);
void scale(const Modulus& mod, std::uint64_t alpha, std::span<const std::uint64_t> x,
           std::span<std::uint64_t> out);
void axpy(const Modulus& mod, std::uint64_t alpha, std::span<const std::uint64_t> x,
          std::span<std::uint64_t> y);
void weighted_row_sum(const Modulus& mod, std::span<const std::uint64_t> rows, std::size_t m,
                      std::span<const std::uint64_t> weights, std::span<std::uint64_t> out);
void cross_dots(const Modulus& mod, std::span<const std::uint64_t> rows,
                std::span<const std::uint64_t> targets, std::size_t m,
                std::span<std::uint64_t> gram);
void subtract_combination(const Modulus& mod, std::span<const std::uint64_t> rows,
                          std::span<const std::uint64_t> coefs, std::size_t m,
                          std::span<std::uint64_t> targets);

/// Element count below which loops stay on the calling thread.
inline constexpr std::size_t kMinParallelWork = std::size_t{1} << 15;

} // namespace parallel

/// Runtime selection between the two implementations.
struct Kernels {
    Backend backend = Backend::Parallel;

    std::uint64_t dot(const Modulus& mod, std::span<const std::uint64_t> a,
                      std::span<const std::uint64_t> b) const {
        return backend == Backend::Serial ? serial::dot(mod, a, b) : parallel::dot(mod, a, b);
    }
    void scale(const Modulus& mod, std::uint64_t alpha, std::span<const std::uint64_t> x,
               std::span<std::uint64_t> out) const {
        backend == Backend::Serial ? serial::scale(mod, alpha, x, out)
                                   : parallel::scale(mod, alpha, x, out);
    }
    void axpy(const Modulus& mod, std::uint64_t alpha, std::span<const std::uint64_t> x,
              std::span<std::uint64_t> y) const {
        backend == Backend::Serial ? serial::axpy(mod, alpha, x, y)
                                   : parallel::axpy(mod, alpha, x, y);
    }
    void weighted_row_sum(const Modulus& mod, std::span<const std::uint64_t> rows, std::size_t m,
                          std::span<const std::uint64_t> weights,
                          std::span<std::uint64_t> out) const {
        backend == Backend::Serial ? serial::weighted_row_sum(mod, rows, m, weights, out)
                                   : parallel::weighted_row_sum(mod, rows, m, weights, out);
    }
    void cross_dots(const Modulus& mod, std::span<const std::uint64_t> rows,
                    std::span<const std::uint64_t> targets, std::size_t m,
                    std::span<std::uint64_t> gram) const {
        backend == Backend::Serial ? serial::cross_dots(mod, rows, targets, m, gram)
                                   : parallel::cross_dots(mod, rows, targets, m, gram);
    }
    void subtract_combination(const Modulus& mod, std::span<const std::uint64_t> rows,
                              std::span<const std::uint64_t> coefs, std::size_t m,
                              std::span<std::uint64_t> targets) const {
        backend == Backend::Serial ? serial::subtract_combination(mod, rows, coefs, m, targets)
                                   : parallel::subtract_combination(mod, rows, coefs, m, targets);
    }
};

} // namespace okmp::kernels
