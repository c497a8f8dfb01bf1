#include "okmp/ortholin.hpp"

#include "okmp/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace okmp {

namespace {

void require_same(const FVector& a, const FVector& b) {
    if (!(a.field() == b.field())) {
        throw Error(ErrorCode::FieldMismatch, "vectors over different fields");
    }
    if (a.dim() != b.dim()) {
        throw Error(ErrorCode::DimMismatch,
                    "dims " + std::to_string(a.dim()) + " and " + std::to_string(b.dim()));
    }
}

void require_same(const DemoVector& a, const DemoVector& b) {
    if (a.size() != b.size()) {
        throw Error(ErrorCode::DimMismatch,
                    "dims " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
    }
}

} // namespace

FVector::FVector(const PrimeField& field, std::size_t dim) : field_(field), coords_(dim, 0) {}

FVector::FVector(const PrimeField& field, std::vector<std::uint64_t> coords)
    : field_(field), coords_(std::move(coords)) {
    for (std::uint64_t c : coords_) {
        field_.from_canonical(c);
    }
}

FVector FVector::from_signed(const PrimeField& field, std::initializer_list<std::int64_t> coords) {
    FVector out(field, coords.size());
    std::size_t i = 0;
    for (std::int64_t c : coords) {
        out.coords_[i++] = field.from_signed(c).value();
    }
    return out;
}

void FVector::set(std::size_t i, Fe v) {
    field_.check(v);
    coords_.at(i) = v.value();
}

bool FVector::is_zero() const noexcept {
    return std::all_of(coords_.begin(), coords_.end(), [](std::uint64_t c) { return c == 0; });
}

std::size_t FVector::nonzero_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(coords_.begin(), coords_.end(), [](std::uint64_t c) { return c != 0; }));
}

Fe inner(const FVector& a, const FVector& b) {
    require_same(a, b);
    return a.field().element(kernels::parallel::dot(a.field().raw(), a.coords(), b.coords()));
}

FVector add(const FVector& a, const FVector& b) {
    require_same(a, b);
    FVector out = b;
    kernels::parallel::axpy(a.field().raw(), 1, a.coords(), out.coords());
    return out;
}

FVector sub(const FVector& a, const FVector& b) {
    require_same(a, b);
    FVector out = a;
    kernels::parallel::axpy(a.field().raw(), a.field().raw().neg(1), b.coords(), out.coords());
    return out;
}

FVector scale(Fe alpha, const FVector& a) {
    a.field().check(alpha);
    FVector out(a.field(), a.dim());
    kernels::parallel::scale(a.field().raw(), alpha.value(), a.coords(), out.coords());
    return out;
}

DemoInt inner(const DemoVector& a, const DemoVector& b) {
    require_same(a, b);
    DemoInt acc = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

DemoVector add(const DemoVector& a, const DemoVector& b) {
    require_same(a, b);
    DemoVector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = a[i] + b[i];
    }
    return out;
}

DemoVector scale(const DemoInt& alpha, const DemoVector& a) {
    DemoVector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = alpha * a[i];
    }
    return out;
}

// --- OrthogonalSystem -------------------------------------------------------

OrthogonalSystem::OrthogonalSystem(const PrimeField& field, std::size_t dim,
                                   std::vector<std::uint64_t> basis)
    : field_(field), dim_(dim), basis_(std::move(basis)) {
    if (dim_ == 0) {
        throw Error(ErrorCode::DimTooSmall, "dimension must be at least 1");
    }
    if (basis_.size() % dim_ != 0) {
        throw Error(ErrorCode::DimMismatch, "basis storage is not a multiple of the dimension");
    }
    const std::size_t n = basis_.size() / dim_;
    const auto& mod = field_.raw();
    norms_.resize(n);
    norm_invs_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = row(i);
        norms_[i] = kernels::parallel::dot(mod, r, r);
        norm_invs_[i] =
            norms_[i] == 0 ? 0 : field_.inv(field_.element(norms_[i])).value();
    }
}

OrthogonalSystem OrthogonalSystem::from_rows(const PrimeField& field, std::size_t m,
                                             std::vector<std::uint64_t> rows) {
    for (std::uint64_t c : rows) {
        field.from_canonical(c);
    }
    return OrthogonalSystem(field, m, std::move(rows));
}

OrthogonalSystem OrthogonalSystem::from_vectors(const PrimeField& field,
                                                std::span<const FVector> vectors) {
    if (vectors.empty()) {
        throw Error(ErrorCode::DimTooSmall, "cannot infer dimension from an empty set");
    }
    const std::size_t m = vectors.front().dim();
    std::vector<std::uint64_t> rows;
    rows.reserve(vectors.size() * m);
    for (const FVector& v : vectors) {
        if (!(v.field() == field)) {
            throw Error(ErrorCode::FieldMismatch, "vector over a different field");
        }
        if (v.dim() != m) {
            throw Error(ErrorCode::DimMismatch, "vectors of unequal dimension");
        }
        rows.insert(rows.end(), v.coords().begin(), v.coords().end());
    }
    return OrthogonalSystem(field, m, std::move(rows));
}

OrthogonalSystem OrthogonalSystem::canonical(const PrimeField& field, std::size_t m,
                                             std::size_t n) {
    if (field.mode() != FieldMode::Test) {
        throw Error(ErrorCode::WrongMode, "canonical basis is only available in test mode");
    }
    if (n > m) {
        throw Error(ErrorCode::DimTooSmall, "n > m");
    }
    std::vector<std::uint64_t> rows(n * m, 0);
    for (std::size_t i = 0; i < n; ++i) {
        rows[i * m + i] = 1;
    }
    return OrthogonalSystem(field, m, std::move(rows));
}

FVector OrthogonalSystem::vector(std::size_t i) const {
    if (i >= count()) {
        throw std::out_of_range("basis index");
    }
    const auto r = row(i);
    return FVector(field_, std::vector<std::uint64_t>(r.begin(), r.end()));
}

Fe OrthogonalSystem::norm_inv(std::size_t i) const {
    if (norms_.at(i) == 0) {
        throw Error(ErrorCode::IsotropicKey, "basis vector " + std::to_string(i) + " is isotropic");
    }
    return field_.element(norm_invs_[i]);
}

OrthogonalSystem OrthogonalSystem::prefix(std::size_t k) const {
    if (k > count()) {
        throw std::out_of_range("prefix longer than system");
    }
    OrthogonalSystem out = *this;
    out.basis_.resize(k * dim_);
    out.norms_.resize(k);
    out.norm_invs_.resize(k);
    return out;
}

std::vector<std::byte> OrthogonalSystem::export_bytes() const {
    std::vector<std::byte> out(16 + basis_.size() * 8);
    store_le64(field_.modulus(), out.data());
    const auto m = static_cast<std::uint32_t>(dim_);
    const auto n = static_cast<std::uint32_t>(count());
    for (int i = 0; i < 4; ++i) {
        out[8 + i] = static_cast<std::byte>(m >> (8 * i));
        out[12 + i] = static_cast<std::byte>(n >> (8 * i));
    }
    for (std::size_t i = 0; i < basis_.size(); ++i) {
        store_le64(basis_[i], out.data() + 16 + 8 * i);
    }
    return out;
}

OrthogonalSystem OrthogonalSystem::import_bytes(std::span<const std::byte> bytes,
                                                FieldMode mode) {
    if (bytes.size() < 16) {
        throw Error(ErrorCode::TruncatedFrame, "system header needs 16 bytes");
    }
    auto le32 = [&](std::size_t at) {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(bytes[at + i]) << (8 * i);
        }
        return v;
    };
    const PrimeField field(load_le64(bytes.data()), mode);
    const std::size_t m = le32(8);
    const std::size_t n = le32(12);
    if (bytes.size() != 16 + n * m * 8) {
        throw Error(ErrorCode::LengthMismatch, "system body does not match n*m elements");
    }
    std::vector<std::uint64_t> rows(n * m);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i] = field.from_canonical(load_le64(bytes.data() + 16 + 8 * i)).value();
    }
    return OrthogonalSystem(field, m, std::move(rows));
}

// --- generation -------------------------------------------------------------

namespace {

class SlotExhausted {};

class GramSchmidtBuilder {
public:
    GramSchmidtBuilder(const PrimeField& field, std::size_t m, std::size_t n, RandomSource& rng,
                       const GenOptions& options)
        : field_(field), mod_(field.raw()), m_(m), n_(n), rng_(rng), opt_(options),
          kern_{options.backend} {
        rows_.reserve(n * m);
        norm_invs_.reserve(n);
    }

    std::vector<std::uint64_t> build() {
        rows_.clear();
        norm_invs_.clear();
        const std::size_t block = std::max<std::size_t>(1, opt_.block);
        std::vector<std::uint64_t> cands;
        while (accepted() < n_) {
            const std::size_t b = std::min(block, n_ - accepted());
            const std::size_t block_start = accepted();
            cands.resize(b * m_);
            for (auto& c : cands) {
                c = rng_.uniform_below(mod_.p);
            }
            project(0, block_start, cands);
            for (std::size_t t = 0; t < b; ++t) {
                std::span<std::uint64_t> cand(cands.data() + t * m_, m_);
                project(block_start, accepted(), cand);
                settle(cand);
            }
        }
        return std::move(rows_);
    }

private:
    std::size_t accepted() const { return norm_invs_.size(); }

    // targets -= sum_j <target, e_j> / <e_j, e_j> * e_j  for j in [lo, hi)
    void project(std::size_t lo, std::size_t hi, std::span<std::uint64_t> targets) {
        const std::size_t k = hi - lo;
        if (k == 0) {
            return;
        }
        const std::size_t b = targets.size() / m_;
        std::span<const std::uint64_t> basis(rows_.data() + lo * m_, k * m_);
        coefs_.resize(b * k);
        kern_.cross_dots(mod_, basis, targets, m_, coefs_);
        for (std::size_t t = 0; t < b; ++t) {
            for (std::size_t j = 0; j < k; ++j) {
                auto& c = coefs_[t * k + j];
                c = mod_.mul(c, norm_invs_[lo + j]);
            }
        }
        kern_.subtract_combination(mod_, basis, coefs_, m_, targets);
    }

    bool acceptable(std::span<const std::uint64_t> cand, std::uint64_t& norm) const {
        const auto nonzero = std::count_if(cand.begin(), cand.end(),
                                           [](std::uint64_t c) { return c != 0; });
        // Dense candidates; a scaled standard basis vector is refused.
        if (nonzero == 0 || (m_ >= 2 && nonzero < 2)) {
            return false;
        }
        norm = kern_.dot(mod_, cand, cand);
        return norm != 0;
    }

    void settle(std::span<std::uint64_t> cand) {
        std::uint64_t norm = 0;
        for (unsigned attempt = 0;; ++attempt) {
            if (acceptable(cand, norm)) {
                rows_.insert(rows_.end(), cand.begin(), cand.end());
                norm_invs_.push_back(field_.inv(field_.element(norm)).value());
                return;
            }
            if (attempt + 1 >= opt_.resamples_per_slot) {
                throw SlotExhausted{};
            }
            for (auto& c : cand) {
                c = rng_.uniform_below(mod_.p);
            }
            project(0, accepted(), cand);
        }
    }

    const PrimeField& field_;
    kernels::Modulus mod_;
    std::size_t m_;
    std::size_t n_;
    RandomSource& rng_;
    GenOptions opt_;
    kernels::Kernels kern_;
    std::vector<std::uint64_t> rows_;
    std::vector<std::uint64_t> norm_invs_;
    std::vector<std::uint64_t> coefs_;
};

} // namespace

OrthogonalSystem gen_orthogonal_system(const PrimeField& field, std::size_t m, std::size_t n,
                                       RandomSource& rng, const GenOptions& options) {
    if (m == 0) {
        throw Error(ErrorCode::DimTooSmall, "dimension must be at least 1");
    }
    if (n > m) {
        throw Error(ErrorCode::DimTooSmall,
                    "cannot fit " + std::to_string(n) + " orthogonal vectors in dimension " +
                        std::to_string(m));
    }
    if (field.mode() == FieldMode::Protocol && m <= 2 * n) {
        throw Error(ErrorCode::ParamsRejected,
                    "protocol mode requires m > 2n (m=" + std::to_string(m) +
                        ", n=" + std::to_string(n) + ")");
    }
    GramSchmidtBuilder builder(field, m, n, rng, options);
    for (unsigned attempt = 0; attempt <= options.restarts; ++attempt) {
        try {
            return OrthogonalSystem::from_rows(field, m, builder.build());
        } catch (const SlotExhausted&) {
        }
    }
    throw Error(ErrorCode::IsotropyExhausted,
                "no anisotropic orthogonal candidate after " +
                    std::to_string(options.resamples_per_slot) + " resamples per slot and " +
                    std::to_string(options.restarts) + " restarts");
}

// --- verification -----------------------------------------------------------

OrthogonalityReport verify_orthogonal(const OrthogonalSystem& system) {
    OrthogonalityReport report;
    const auto& mod = system.field().raw();
    const std::size_t n = system.count();
    for (std::size_t i = 0; i < n; ++i) {
        if (kernels::serial::dot(mod, system.row(i), system.row(i)) == 0) {
            report.isotropic.push_back(i);
        }
        for (std::size_t j = i + 1; j < n; ++j) {
            if (kernels::serial::dot(mod, system.row(i), system.row(j)) != 0) {
                report.non_orthogonal.emplace_back(i, j);
            }
        }
    }
    return report;
}

OrthogonalityReport verify_orthogonal(std::span<const DemoVector> system) {
    OrthogonalityReport report;
    for (std::size_t i = 0; i < system.size(); ++i) {
        if (inner(system[i], system[i]) == 0) {
            report.isotropic.push_back(i);
        }
        for (std::size_t j = i + 1; j < system.size(); ++j) {
            if (inner(system[i], system[j]) != 0) {
                report.non_orthogonal.emplace_back(i, j);
            }
        }
    }
    return report;
}

// --- parameter advice -------------------------------------------------------

double tuple_count_log2(std::uint64_t q, std::size_t n) {
    const double nn = static_cast<double>(n);
    const double log2_factorial = std::lgamma(nn + 1.0) / std::numbers::ln2;
    return 1.5 * nn * nn * std::log2(static_cast<double>(q)) - log2_factorial;
}

ParamAdvice advise_params(std::size_t n, const PrimeField& field) {
    ParamAdvice advice{2 * n + 1, tuple_count_log2(field.modulus(), n), {}};
    if (field.modulus() < kProtocolPrimeFloor) {
        advice.warnings.push_back("field below protocol floor 2^31");
    }
    if (advice.security_log2 < kSecurityBits) {
        advice.warnings.push_back("security margin below 128 bits");
    }
    return advice;
}

} // namespace okmp
