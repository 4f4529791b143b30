#pragma once

#include <cstddef>
#include <string>

namespace nrn::kernels {

// Dense double-precision primitives behind the tape and the scorer. Each has
// a scalar reference implementation and an AVX2 variant; the backend is
// chosen once at startup (override with NRN_KERNELS=scalar|avx2). Matrices
// are row-major.
struct Backend {
    const char* name;

    // sum_i a[i]*b[i]
    double (*dot)(const double* a, const double* b, std::size_t n);
    // y[i] += alpha * x[i]
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // y[i] = alpha * x[i] + beta
    void (*affine)(double alpha, double beta, const double* x, double* y, std::size_t n);
    void (*add)(const double* a, const double* b, double* y, std::size_t n);
    void (*sub)(const double* a, const double* b, double* y, std::size_t n);
    void (*mul)(const double* a, const double* b, double* y, std::size_t n);
    // y = A x, A is m x n
    void (*matvec)(const double* A, std::size_t m, std::size_t n, const double* x, double* y);
    // gx += A^T g, A is m x n, g has m entries, gx has n
    void (*matvec_t_acc)(const double* A, std::size_t m, std::size_t n, const double* g, double* gx);
    // A += g x^T (rank-1 accumulate into an m x n matrix)
    void (*ger_acc)(double* A, std::size_t m, std::size_t n, const double* g, const double* x);
    double (*sum)(const double* a, std::size_t n);
    double (*max)(const double* a, std::size_t n);
};

const Backend& scalar();
bool avx2_available();
const Backend& avx2();  // valid only if avx2_available()

// Active backend after env override; resolved once, thread-safe.
const Backend& active();
std::string active_name();

}  // namespace nrn::kernels
