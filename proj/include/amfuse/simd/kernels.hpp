#pragma once

// Data-parallel inner loops shared by the simulator, the reference model and
// the fusion engine. Each kernel has a portable scalar reference version and
// vectorised variants; one is picked at first use based on CPU support and
// the AMFUSE_ISA environment variable ("scalar", "avx2", "neon").

#include <cstddef>
#include <span>
#include <string_view>

namespace amfuse::simd {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa);

/// Best ISA the running CPU and this build support.
Isa detected_isa();

/// ISA currently used by the dispatching entry points below.
Isa active_isa();

/// Force a specific ISA (tests, benchmarking). Returns false, leaving the
/// selection unchanged, if the ISA is unavailable.
bool set_active_isa(Isa isa);

/// Weighted running-average update of a batch of TSDF voxels.
///
/// For each i with w[i] > 0:
///     Wp   = min(W[i], prior_cap[i])
///     D[i] = (Wp * D[i] + w[i] * d[i]) / (Wp + w[i])
///     W[i] = min(Wp + w[i], w_max)
/// Elements with w[i] <= 0 are left untouched.
struct FuseBatch {
    std::span<double> D;
    std::span<double> W;
    std::span<const double> d;
    std::span<const double> w;
    std::span<const double> prior_cap;
    double w_max = 0.0;
};

// Function table for one instruction set.
struct KernelTable {
    // y[i] += a * x[i]
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    void (*fuse_tsdf)(double* D, double* W, const double* d, const double* w, const double* prior_cap,
                      double w_max, std::size_t n);
    // In place p <- R p + t over structure-of-arrays coordinates; R row-major.
    void (*rigid_transform)(const double* r, const double* t, double* x, double* y, double* z, std::size_t n);
};

const KernelTable& kernels_for(Isa isa);

void axpy(double a, std::span<const double> x, std::span<double> y);
void fuse_tsdf(const FuseBatch& batch);
void rigid_transform(const double (&r)[9], const double (&t)[3], std::span<double> x, std::span<double> y,
                     std::span<double> z);

}  // namespace amfuse::simd
