#include "nrn/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <mutex>

namespace nrn::kernels {

namespace {

double s_dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void s_axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void s_affine(double alpha, double beta, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = alpha * x[i] + beta;
}

void s_add(const double* a, const double* b, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

void s_sub(const double* a, const double* b, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a[i] - b[i];
}

void s_mul(const double* a, const double* b, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

void s_matvec(const double* A, std::size_t m, std::size_t n, const double* x, double* y) {
    for (std::size_t i = 0; i < m; ++i) y[i] = s_dot(A + i * n, x, n);
}

void s_matvec_t_acc(const double* A, std::size_t m, std::size_t n, const double* g, double* gx) {
    for (std::size_t i = 0; i < m; ++i) s_axpy(g[i], A + i * n, gx, n);
}

void s_ger_acc(double* A, std::size_t m, std::size_t n, const double* g, const double* x) {
    for (std::size_t i = 0; i < m; ++i) s_axpy(g[i], x, A + i * n, n);
}

double s_sum(const double* a, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i];
    return acc;
}

double s_max(const double* a, std::size_t n) {
    double best = a[0];
    for (std::size_t i = 1; i < n; ++i)
        if (a[i] > best) best = a[i];
    return best;
}

const Backend kScalar = {
    "scalar", s_dot,    s_axpy,         s_affine,  s_add, s_sub,
    s_mul,    s_matvec, s_matvec_t_acc, s_ger_acc, s_sum, s_max,
};

const Backend* resolve() {
    const char* env = std::getenv("NRN_KERNELS");
    if (env != nullptr) {
        if (std::strcmp(env, "scalar") == 0) return &kScalar;
        if (std::strcmp(env, "avx2") == 0 && avx2_available()) return &avx2();
    }
    if (avx2_available()) return &avx2();
    return &kScalar;
}

}  // namespace

const Backend& scalar() { return kScalar; }

const Backend& active() {
    static const Backend* chosen = resolve();
    return *chosen;
}

std::string active_name() { return active().name; }

}  // namespace nrn::kernels
