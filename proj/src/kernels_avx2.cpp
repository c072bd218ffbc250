// AVX2 backend.  Elementwise kernels evaluate the exact expression tree of
// the scalar reference (no FMA, contraction disabled project-wide), so their
// outputs are bitwise identical; reductions keep four lanes of partial sums
// and therefore agree with the reference only to rounding.

#include "metrosim/kernels.hpp"

#if defined(METROSIM_HAVE_AVX2)

#include <immintrin.h>

#include <cmath>

namespace metrosim::kernels::detail {

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swap = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swap));
}

}  // namespace

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        __m256d vx = _mm256_loadu_pd(x + i);
        vy = _mm256_add_pd(vy, _mm256_mul_pd(va, vx));
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vx = _mm256_loadu_pd(x + i);
        __m256d vy = _mm256_loadu_pd(y + i);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(vx, vy));
    }
    double s = hsum(acc);
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

void matvec_avx2(const double* w, const double* x, const double* b, double* y,
                 std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* wr = w + r * cols;
        __m256d acc = _mm256_setzero_pd();
        std::size_t c = 0;
        for (; c + 4 <= cols; c += 4) {
            __m256d vw = _mm256_loadu_pd(wr + c);
            __m256d vx = _mm256_loadu_pd(x + c);
            acc = _mm256_add_pd(acc, _mm256_mul_pd(vw, vx));
        }
        double s = (b ? b[r] : 0.0) + hsum(acc);
        for (; c < cols; ++c) s += wr[c] * x[c];
        y[r] = s;
    }
}

void matvec_t_avx2(const double* w, const double* x, double* y,
                   std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const __m256d vxr = _mm256_set1_pd(x[r]);
        const double* wr = w + r * cols;
        std::size_t c = 0;
        for (; c + 4 <= cols; c += 4) {
            __m256d vy = _mm256_loadu_pd(y + c);
            __m256d vw = _mm256_loadu_pd(wr + c);
            vy = _mm256_add_pd(vy, _mm256_mul_pd(vxr, vw));
            _mm256_storeu_pd(y + c, vy);
        }
        const double xr = x[r];
        for (; c < cols; ++c) y[c] += xr * wr[c];
    }
}

void ger_avx2(double alpha, const double* x, const double* y, double* a,
              std::size_t m, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double ax = alpha * x[i];
        const __m256d vax = _mm256_set1_pd(ax);
        double* ar = a + i * n;
        std::size_t j = 0;
        for (; j + 4 <= n; j += 4) {
            __m256d va = _mm256_loadu_pd(ar + j);
            __m256d vy = _mm256_loadu_pd(y + j);
            va = _mm256_add_pd(va, _mm256_mul_pd(vax, vy));
            _mm256_storeu_pd(ar + j, va);
        }
        for (; j < n; ++j) ar[j] += ax * y[j];
    }
}

void adam_update_avx2(double* p, const double* g, double* m, double* v,
                      std::size_t n, double lr, double beta1, double beta2,
                      double eps, long t) {
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    const __m256d vb1 = _mm256_set1_pd(beta1);
    const __m256d vb2 = _mm256_set1_pd(beta2);
    const __m256d vomb1 = _mm256_set1_pd(1.0 - beta1);
    const __m256d vomb2 = _mm256_set1_pd(1.0 - beta2);
    const __m256d vbc1 = _mm256_set1_pd(bc1);
    const __m256d vbc2 = _mm256_set1_pd(bc2);
    const __m256d vlr = _mm256_set1_pd(lr);
    const __m256d veps = _mm256_set1_pd(eps);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vg = _mm256_loadu_pd(g + i);
        __m256d vm = _mm256_loadu_pd(m + i);
        __m256d vv = _mm256_loadu_pd(v + i);
        vm = _mm256_add_pd(_mm256_mul_pd(vb1, vm), _mm256_mul_pd(vomb1, vg));
        vv = _mm256_add_pd(_mm256_mul_pd(vb2, vv),
                           _mm256_mul_pd(vomb2, _mm256_mul_pd(vg, vg)));
        _mm256_storeu_pd(m + i, vm);
        _mm256_storeu_pd(v + i, vv);
        const __m256d vmhat = _mm256_div_pd(vm, vbc1);
        const __m256d vvhat = _mm256_div_pd(vv, vbc2);
        const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vvhat), veps);
        const __m256d step = _mm256_div_pd(_mm256_mul_pd(vlr, vmhat), denom);
        __m256d vp = _mm256_loadu_pd(p + i);
        vp = _mm256_sub_pd(vp, step);
        _mm256_storeu_pd(p + i, vp);
    }
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * (g[i] * g[i]);
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace metrosim::kernels::detail

#endif  // METROSIM_HAVE_AVX2
