#pragma once

#include <cstddef>

namespace amfuse::simd {

#define AMFUSE_DECLARE_KERNELS                                                                                      \
    void axpy(double a, const double* x, double* y, std::size_t n);                                                 \
    void fuse_tsdf(double* D, double* W, const double* d, const double* w, const double* prior_cap, double w_max,  \
                   std::size_t n);                                                                                  \
    void rigid_transform(const double* r, const double* t, double* x, double* y, double* z, std::size_t n);

namespace scalar {
AMFUSE_DECLARE_KERNELS
}

#if defined(AMFUSE_HAVE_AVX2)
namespace avx2 {
AMFUSE_DECLARE_KERNELS
}
#endif

#if defined(__aarch64__)
namespace neon {
AMFUSE_DECLARE_KERNELS
}
#endif

#undef AMFUSE_DECLARE_KERNELS

}  // namespace amfuse::simd
