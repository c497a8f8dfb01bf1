#include "okmp/kernels.hpp"

#include <algorithm>
#include <cassert>
#include <vector>

namespace okmp::kernels::parallel {

namespace {

// Each term type maps a product of residues to a value below 2^64, so a
// 128-bit accumulator absorbs any realistic number of terms before the
// single final reduction.
struct M61Term {
    u128 operator()(std::uint64_t a, std::uint64_t b) const {
        return Modulus::fold_m61(static_cast<u128>(a) * b);
    }
};

struct SmallTerm {
    // p <= 2^32: the raw product already fits in 64 bits.
    u128 operator()(std::uint64_t a, std::uint64_t b) const {
        return static_cast<u128>(a) * b;
    }
};

struct GenericTerm {
    Modulus mod;
    u128 operator()(std::uint64_t a, std::uint64_t b) const { return mod.mul(a, b); }
};

template <class Body>
decltype(auto) with_term(const Modulus& mod, Body&& body) {
    if (mod.mersenne61) {
        return body(M61Term{});
    }
    if (mod.p <= (std::uint64_t{1} << 32)) {
        return body(SmallTerm{});
    }
    return body(GenericTerm{mod});
}

constexpr std::size_t kColumnChunk = 256;

} // namespace

std::uint64_t dot(const Modulus& mod, std::span<const std::uint64_t> a,
                  std::span<const std::uint64_t> b) {
    assert(a.size() == b.size());
    const std::size_t n = a.size();
    const std::uint64_t* pa = a.data();
    const std::uint64_t* pb = b.data();
    return with_term(mod, [&](auto term) {
        std::uint64_t total = 0;
#pragma omp parallel if (n >= kMinParallelWork)
        {
            u128 local = 0;
#pragma omp for schedule(static) nowait
            for (std::size_t i = 0; i < n; ++i) {
                local += term(pa[i], pb[i]);
            }
            const std::uint64_t reduced = mod.reduce(local);
#pragma omp critical(okmp_dot)
            total = mod.add(total, reduced);
        }
        return total;
    });
}

void scale(const Modulus& mod, std::uint64_t alpha, std::span<const std::uint64_t> x,
           std::span<std::uint64_t> out) {
    assert(x.size() == out.size());
    const std::size_t n = x.size();
#pragma omp parallel for schedule(static) if (n >= kMinParallelWork)
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = mod.mul(alpha, x[i]);
    }
}

void axpy(const Modulus& mod, std::uint64_t alpha, std::span<const std::uint64_t> x,
          std::span<std::uint64_t> y) {
    assert(x.size() == y.size());
    const std::size_t n = x.size();
#pragma omp parallel for schedule(static) if (n >= kMinParallelWork)
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = mod.add(y[i], mod.mul(alpha, x[i]));
    }
}

void weighted_row_sum(const Modulus& mod, std::span<const std::uint64_t> rows, std::size_t m,
                      std::span<const std::uint64_t> weights, std::span<std::uint64_t> out) {
    assert(out.size() == m && rows.size() == weights.size() * m);
    const std::size_t n = weights.size();
    const std::size_t chunks = (m + kColumnChunk - 1) / kColumnChunk;
    with_term(mod, [&](auto term) {
#pragma omp parallel for schedule(static) if (n * m >= kMinParallelWork)
        for (std::size_t c = 0; c < chunks; ++c) {
            const std::size_t lo = c * kColumnChunk;
            const std::size_t hi = std::min(m, lo + kColumnChunk);
            u128 acc[kColumnChunk] = {};
            for (std::size_t i = 0; i < n; ++i) {
                const std::uint64_t w = weights[i];
                const std::uint64_t* row = rows.data() + i * m;
                for (std::size_t col = lo; col < hi; ++col) {
                    acc[col - lo] += term(w, row[col]);
                }
            }
            for (std::size_t col = lo; col < hi; ++col) {
                out[col] = mod.reduce(acc[col - lo]);
            }
        }
        return 0;
    });
}

void cross_dots(const Modulus& mod, std::span<const std::uint64_t> rows,
                std::span<const std::uint64_t> targets, std::size_t m,
                std::span<std::uint64_t> gram) {
    if (m == 0) {
        return;
    }
    const std::size_t k = rows.size() / m;
    const std::size_t b = targets.size() / m;
    assert(gram.size() == k * b);
    with_term(mod, [&](auto term) {
#pragma omp parallel for schedule(static) if (k * b * m >= kMinParallelWork)
        for (std::size_t j = 0; j < k; ++j) {
            const std::uint64_t* row = rows.data() + j * m;
            for (std::size_t t = 0; t < b; ++t) {
                const std::uint64_t* tgt = targets.data() + t * m;
                u128 acc = 0;
                for (std::size_t col = 0; col < m; ++col) {
                    acc += term(row[col], tgt[col]);
                }
                gram[t * k + j] = mod.reduce(acc);
            }
        }
        return 0;
    });
}

void subtract_combination(const Modulus& mod, std::span<const std::uint64_t> rows,
                          std::span<const std::uint64_t> coefs, std::size_t m,
                          std::span<std::uint64_t> targets) {
    if (m == 0) {
        return;
    }
    const std::size_t k = rows.size() / m;
    const std::size_t b = targets.size() / m;
    assert(coefs.size() == k * b);
    const std::size_t chunks = (m + kColumnChunk - 1) / kColumnChunk;
    with_term(mod, [&](auto term) {
#pragma omp parallel if (k * b * m >= kMinParallelWork)
        {
            std::vector<u128> acc(b * kColumnChunk);
#pragma omp for schedule(static)
            for (std::size_t c = 0; c < chunks; ++c) {
                const std::size_t lo = c * kColumnChunk;
                const std::size_t width = std::min(m, lo + kColumnChunk) - lo;
                std::fill(acc.begin(), acc.end(), u128{0});
                for (std::size_t j = 0; j < k; ++j) {
                    const std::uint64_t* row = rows.data() + j * m + lo;
                    for (std::size_t t = 0; t < b; ++t) {
                        const std::uint64_t coef = coefs[t * k + j];
                        if (coef == 0) {
                            continue;
                        }
                        u128* a = acc.data() + t * kColumnChunk;
                        for (std::size_t col = 0; col < width; ++col) {
                            a[col] += term(coef, row[col]);
                        }
                    }
                }
                for (std::size_t t = 0; t < b; ++t) {
                    std::uint64_t* tgt = targets.data() + t * m + lo;
                    const u128* a = acc.data() + t * kColumnChunk;
                    for (std::size_t col = 0; col < width; ++col) {
                        tgt[col] = mod.sub(tgt[col], mod.reduce(a[col]));
                    }
                }
            }
        }
        return 0;
    });
}

} // namespace okmp::kernels::parallel
