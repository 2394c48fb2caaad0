#include "amfuse/simd/kernels.hpp"

#include "kernels_impl.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace amfuse::simd {

namespace {

constexpr KernelTable kScalar{&scalar::axpy, &scalar::fuse_tsdf, &scalar::rigid_transform};
#if defined(AMFUSE_HAVE_AVX2)
constexpr KernelTable kAvx2{&avx2::axpy, &avx2::fuse_tsdf, &avx2::rigid_transform};
#endif
#if defined(__aarch64__)
constexpr KernelTable kNeon{&neon::axpy, &neon::fuse_tsdf, &neon::rigid_transform};
#endif

bool isa_available(Isa isa)
{
    switch (isa) {
    case Isa::scalar:
        return true;
    case Isa::avx2:
#if defined(AMFUSE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
        return __builtin_cpu_supports("avx2");
#else
        return false;
#endif
    case Isa::neon:
#if defined(__aarch64__)
        return true;
#else
        return false;
#endif
    }
    return false;
}

Isa initial_isa()
{
    if (const char* env = std::getenv("AMFUSE_ISA")) {
        const std::string want(env);
        for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon})
            if (want == isa_name(isa) && isa_available(isa))
                return isa;
    }
    return detected_isa();
}

std::atomic<Isa>& active()
{
    static std::atomic<Isa> isa{initial_isa()};
    return isa;
}

}  // namespace

std::string_view isa_name(Isa isa)
{
    switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
    }
    return "unknown";
}

Isa detected_isa()
{
    if (isa_available(Isa::avx2))
        return Isa::avx2;
    if (isa_available(Isa::neon))
        return Isa::neon;
    return Isa::scalar;
}

Isa active_isa() { return active().load(std::memory_order_relaxed); }

bool set_active_isa(Isa isa)
{
    if (!isa_available(isa))
        return false;
    active().store(isa, std::memory_order_relaxed);
    return true;
}

const KernelTable& kernels_for(Isa isa)
{
    switch (isa) {
#if defined(AMFUSE_HAVE_AVX2)
    case Isa::avx2: return kAvx2;
#endif
#if defined(__aarch64__)
    case Isa::neon: return kNeon;
#endif
    default: return kScalar;
    }
}

void axpy(double a, std::span<const double> x, std::span<double> y)
{
    if (x.size() != y.size())
        throw std::invalid_argument("axpy: length mismatch");
    kernels_for(active_isa()).axpy(a, x.data(), y.data(), x.size());
}

void fuse_tsdf(const FuseBatch& b)
{
    const std::size_t n = b.D.size();
    if (b.W.size() != n || b.d.size() != n || b.w.size() != n || b.prior_cap.size() != n)
        throw std::invalid_argument("fuse_tsdf: length mismatch");
    kernels_for(active_isa()).fuse_tsdf(b.D.data(), b.W.data(), b.d.data(), b.w.data(), b.prior_cap.data(), b.w_max,
                                        n);
}

void rigid_transform(const double (&r)[9], const double (&t)[3], std::span<double> x, std::span<double> y,
                     std::span<double> z)
{
    if (x.size() != y.size() || x.size() != z.size())
        throw std::invalid_argument("rigid_transform: length mismatch");
    kernels_for(active_isa()).rigid_transform(r, t, x.data(), y.data(), z.data(), x.size());
}

}  // namespace amfuse::simd
