#include "okmp/kernels.hpp"

#include <cassert>

namespace okmp::kernels::serial {

std::uint64_t dot(const Modulus& mod, std::span<const std::uint64_t> a,
                  std::span<const std::uint64_t> b) {
    assert(a.size() == b.size());
    std::uint64_t acc = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc = mod.add(acc, mod.mul(a[i], b[i]));
    }
    return acc;
}

void scale(const Modulus& mod, std::uint64_t alpha, std::span<const std::uint64_t> x,
           std::span<std::uint64_t> out) {
    assert(x.size() == out.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = mod.mul(alpha, x[i]);
    }
}

void axpy(const Modulus& mod, std::uint64_t alpha, std::span<const std::uint64_t> x,
          std::span<std::uint64_t> y) {
    assert(x.size() == y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = mod.add(y[i], mod.mul(alpha, x[i]));
    }
}

void weighted_row_sum(const Modulus& mod, std::span<const std::uint64_t> rows, std::size_t m,
                      std::span<const std::uint64_t> weights, std::span<std::uint64_t> out) {
    assert(out.size() == m && rows.size() == weights.size() * m);
    for (auto& v : out) {
        v = 0;
    }
    for (std::size_t i = 0; i < weights.size(); ++i) {
        axpy(mod, weights[i], rows.subspan(i * m, m), out);
    }
}

void cross_dots(const Modulus& mod, std::span<const std::uint64_t> rows,
                std::span<const std::uint64_t> targets, std::size_t m,
                std::span<std::uint64_t> gram) {
    const std::size_t k = m == 0 ? 0 : rows.size() / m;
    const std::size_t b = m == 0 ? 0 : targets.size() / m;
    assert(gram.size() == k * b);
    for (std::size_t t = 0; t < b; ++t) {
        for (std::size_t j = 0; j < k; ++j) {
            gram[t * k + j] = dot(mod, targets.subspan(t * m, m), rows.subspan(j * m, m));
        }
    }
}

void subtract_combination(const Modulus& mod, std::span<const std::uint64_t> rows,
                          std::span<const std::uint64_t> coefs, std::size_t m,
                          std::span<std::uint64_t> targets) {
    const std::size_t k = m == 0 ? 0 : rows.size() / m;
    const std::size_t b = m == 0 ? 0 : targets.size() / m;
    assert(coefs.size() == k * b);
    for (std::size_t t = 0; t < b; ++t) {
        auto target = targets.subspan(t * m, m);
        for (std::size_t j = 0; j < k; ++j) {
            axpy(mod, mod.neg(coefs[t * k + j]), rows.subspan(j * m, m), target);
        }
    }
}

} // namespace okmp::kernels::serial
