#include "kernels_impl.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

#include <algorithm>

namespace amfuse::simd::neon {

void axpy(double a, const double* x, double* y, std::size_t n)
{
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t vx = vld1q_f64(x + i);
        const float64x2_t vy = vld1q_f64(y + i);
        vst1q_f64(y + i, vaddq_f64(vy, vmulq_f64(va, vx)));
    }
    for (; i < n; ++i)
        y[i] += a * x[i];
}

void fuse_tsdf(double* D, double* W, const double* d, const double* w, const double* prior_cap, double w_max,
               std::size_t n)
{
    const float64x2_t vzero = vdupq_n_f64(0.0);
    const float64x2_t vwmax = vdupq_n_f64(w_max);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t vw = vld1q_f64(w + i);
        const uint64x2_t mask = vcgtq_f64(vw, vzero);
        if ((vgetq_lane_u64(mask, 0) | vgetq_lane_u64(mask, 1)) == 0)
            continue;
        const float64x2_t vD = vld1q_f64(D + i);
        const float64x2_t vW = vld1q_f64(W + i);
        const float64x2_t vd = vld1q_f64(d + i);
        const float64x2_t vcap = vld1q_f64(prior_cap + i);
        const float64x2_t wp = vbslq_f64(vcltq_f64(vcap, vW), vcap, vW);
        const float64x2_t sum = vaddq_f64(wp, vw);
        const float64x2_t num = vaddq_f64(vmulq_f64(wp, vD), vmulq_f64(vw, vd));
        const float64x2_t newD = vdivq_f64(num, sum);
        const float64x2_t newW = vbslq_f64(vcltq_f64(vwmax, sum), vwmax, sum);
        vst1q_f64(D + i, vbslq_f64(mask, newD, vD));
        vst1q_f64(W + i, vbslq_f64(mask, newW, vW));
    }
    for (; i < n; ++i) {
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
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t px = vld1q_f64(x + i);
        const float64x2_t py = vld1q_f64(y + i);
        const float64x2_t pz = vld1q_f64(z + i);
        const float64x2_t nx = vaddq_f64(
            vaddq_f64(vaddq_f64(vmulq_n_f64(px, r[0]), vmulq_n_f64(py, r[1])), vmulq_n_f64(pz, r[2])),
            vdupq_n_f64(t[0]));
        const float64x2_t ny = vaddq_f64(
            vaddq_f64(vaddq_f64(vmulq_n_f64(px, r[3]), vmulq_n_f64(py, r[4])), vmulq_n_f64(pz, r[5])),
            vdupq_n_f64(t[1]));
        const float64x2_t nz = vaddq_f64(
            vaddq_f64(vaddq_f64(vmulq_n_f64(px, r[6]), vmulq_n_f64(py, r[7])), vmulq_n_f64(pz, r[8])),
            vdupq_n_f64(t[2]));
        vst1q_f64(x + i, nx);
        vst1q_f64(y + i, ny);
        vst1q_f64(z + i, nz);
    }
    for (; i < n; ++i) {
        const double px = x[i], py = y[i], pz = z[i];
        x[i] = r[0] * px + r[1] * py + r[2] * pz + t[0];
        y[i] = r[3] * px + r[4] * py + r[5] * pz + t[1];
        z[i] = r[6] * px + r[7] * py + r[8] * pz + t[2];
    }
}

}  // namespace amfuse::simd::neon

#endif
