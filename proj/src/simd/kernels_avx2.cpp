// Built with -mavx2 -ffp-contract=off so every lane performs the same
// rounded operations as the scalar reference.
#include "kernels_impl.hpp"

#include <immintrin.h>

#include <algorithm>

namespace amfuse::simd::avx2 {

void axpy(double a, const double* x, double* y, std::size_t n)
{
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vx = _mm256_loadu_pd(x + i);
        const __m256d vy = _mm256_loadu_pd(y + i);
        _mm256_storeu_pd(y + i, _mm256_add_pd(vy, _mm256_mul_pd(va, vx)));
    }
    for (; i < n; ++i)
        y[i] += a * x[i];
}

void fuse_tsdf(double* D, double* W, const double* d, const double* w, const double* prior_cap, double w_max,
               std::size_t n)
{
    const __m256d vzero = _mm256_setzero_pd();
    const __m256d vwmax = _mm256_set1_pd(w_max);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vw = _mm256_loadu_pd(w + i);
        const __m256d mask = _mm256_cmp_pd(vw, vzero, _CMP_GT_OQ);
        if (_mm256_movemask_pd(mask) == 0)
            continue;
        const __m256d vD = _mm256_loadu_pd(D + i);
        const __m256d vW = _mm256_loadu_pd(W + i);
        const __m256d vd = _mm256_loadu_pd(d + i);
        const __m256d vcap = _mm256_loadu_pd(prior_cap + i);
        // min(W, cap) with std::min semantics: cap < W ? cap : W
        const __m256d wp = _mm256_blendv_pd(vW, vcap, _mm256_cmp_pd(vcap, vW, _CMP_LT_OQ));
        const __m256d sum = _mm256_add_pd(wp, vw);
        const __m256d num = _mm256_add_pd(_mm256_mul_pd(wp, vD), _mm256_mul_pd(vw, vd));
        const __m256d newD = _mm256_div_pd(num, sum);
        const __m256d newW = _mm256_blendv_pd(sum, vwmax, _mm256_cmp_pd(vwmax, sum, _CMP_LT_OQ));
        _mm256_storeu_pd(D + i, _mm256_blendv_pd(vD, newD, mask));
        _mm256_storeu_pd(W + i, _mm256_blendv_pd(vW, newW, mask));
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
    const __m256d r0 = _mm256_set1_pd(r[0]), r1 = _mm256_set1_pd(r[1]), r2 = _mm256_set1_pd(r[2]);
    const __m256d r3 = _mm256_set1_pd(r[3]), r4 = _mm256_set1_pd(r[4]), r5 = _mm256_set1_pd(r[5]);
    const __m256d r6 = _mm256_set1_pd(r[6]), r7 = _mm256_set1_pd(r[7]), r8 = _mm256_set1_pd(r[8]);
    const __m256d t0 = _mm256_set1_pd(t[0]), t1 = _mm256_set1_pd(t[1]), t2 = _mm256_set1_pd(t[2]);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d px = _mm256_loadu_pd(x + i);
        const __m256d py = _mm256_loadu_pd(y + i);
        const __m256d pz = _mm256_loadu_pd(z + i);
        // Same association as the scalar loop: ((a + b) + c) + t
        const __m256d nx = _mm256_add_pd(
            _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(r0, px), _mm256_mul_pd(r1, py)), _mm256_mul_pd(r2, pz)), t0);
        const __m256d ny = _mm256_add_pd(
            _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(r3, px), _mm256_mul_pd(r4, py)), _mm256_mul_pd(r5, pz)), t1);
        const __m256d nz = _mm256_add_pd(
            _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(r6, px), _mm256_mul_pd(r7, py)), _mm256_mul_pd(r8, pz)), t2);
        _mm256_storeu_pd(x + i, nx);
        _mm256_storeu_pd(y + i, ny);
        _mm256_storeu_pd(z + i, nz);
    }
    for (; i < n; ++i) {
        const double px = x[i], py = y[i], pz = z[i];
        x[i] = r[0] * px + r[1] * py + r[2] * pz + t[0];
        y[i] = r[3] * px + r[4] * py + r[5] * pz + t[1];
        z[i] = r[6] * px + r[7] * py + r[8] * pz + t[2];
    }
}

}  // namespace amfuse::simd::avx2
