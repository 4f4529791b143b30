#include "nrn/kernels.hpp"

// AVX2/FMA variants of the dense kernels. This translation unit is compiled
// with -mavx2 -mfma; nothing here runs unless the CPU reports AVX2 support.

#if defined(__x86_64__) || defined(_M_X64)
#define NRN_X86 1
#include <immintrin.h>
#else
#define NRN_X86 0
#endif

namespace nrn::kernels {

#if NRN_X86

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

double v_dot(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void v_axpy(double alpha, const double* x, double* y, std::size_t n) {
    __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d r = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        _mm256_storeu_pd(y + i, r);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void v_affine(double alpha, double beta, const double* x, double* y, std::size_t n) {
    __m256d va = _mm256_set1_pd(alpha);
    __m256d vb = _mm256_set1_pd(beta);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vb));
    for (; i < n; ++i) y[i] = alpha * x[i] + beta;
}

void v_add(const double* a, const double* b, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) y[i] = a[i] + b[i];
}

void v_sub(const double* a, const double* b, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) y[i] = a[i] - b[i];
}

void v_mul(const double* a, const double* b, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) y[i] = a[i] * b[i];
}

void v_matvec(const double* A, std::size_t m, std::size_t n, const double* x, double* y) {
    for (std::size_t i = 0; i < m; ++i) y[i] = v_dot(A + i * n, x, n);
}

void v_matvec_t_acc(const double* A, std::size_t m, std::size_t n, const double* g, double* gx) {
    for (std::size_t i = 0; i < m; ++i) v_axpy(g[i], A + i * n, gx, n);
}

void v_ger_acc(double* A, std::size_t m, std::size_t n, const double* g, const double* x) {
    for (std::size_t i = 0; i < m; ++i) v_axpy(g[i], x, A + i * n, n);
}

double v_sum(const double* a, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
    double r = hsum(acc);
    for (; i < n; ++i) r += a[i];
    return r;
}

double v_max(const double* a, std::size_t n) {
    double best = a[0];
    std::size_t i = 0;
    if (n >= 4) {
        __m256d m = _mm256_loadu_pd(a);
        for (i = 4; i + 4 <= n; i += 4) m = _mm256_max_pd(m, _mm256_loadu_pd(a + i));
        alignas(32) double lanes[4];
        _mm256_store_pd(lanes, m);
        for (double v : lanes)
            if (v > best) best = v;
    }
    for (; i < n; ++i)
        if (a[i] > best) best = a[i];
    return best;
}

const Backend kAvx2 = {
    "avx2",   v_dot,    v_axpy,         v_affine,  v_add, v_sub,
    v_mul,    v_matvec, v_matvec_t_acc, v_ger_acc, v_sum, v_max,
};

}  // namespace

bool avx2_available() { return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"); }

const Backend& avx2() { return kAvx2; }

#else

bool avx2_available() { return false; }

const Backend& avx2() { return scalar(); }

#endif

}  // namespace nrn::kernels
