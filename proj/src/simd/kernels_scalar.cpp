#include "kernels_impl.hpp"

#include <algorithm>

namespace amfuse::simd::scalar {

void axpy(double a, const double* x, double* y, std::size_t n)
{
    for (std::size_t i = 0; i < n; ++i)
        y[i] += a * x[i];
}

void fuse_tsdf(double* D, double* W, const double* d, const double* w, const double* prior_cap, double w_max,
               std::size_t n)
{
    for (std::size_t i = 0; i < n; ++i) {
        if (!(w[i] > 0.0))
            continue;
        const double wp = std::min(W[i], prior_cap[i]);
        const double sum = wp + w[i];
        D[i] = (wp * D[i] + w[i] * d[i]) / sum;
        W[i] = std::min(sum, w_max);
    }
}

void rigid_transform(const double* r, const double* t, double* x, double* y, double* z, std::size_t n)
{
    for (std::size_t i = 0; i < n; ++i) {
        const double px = x[i], py = y[i], pz = z[i];
        x[i] = r[0] * px + r[1] * py + r[2] * pz + t[0];
        y[i] = r[3] * px + r[4] * py + r[5] * pz + t[1];
        z[i] = r[6] * px + r[7] * py + r[8] * pz + t[2];
    }
}

}  // namespace amfuse::simd::scalar
