#include "metrosim/kernels.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace metrosim::kernels {

namespace {

Backend pick_default() {
    if (const char* env = std::getenv("METROSIM_KERNELS")) {
        const std::string s(env);
        if (s == "scalar") return Backend::scalar;
        if (s == "avx2") {
            if (!avx2_supported())
                throw std::runtime_error("METROSIM_KERNELS=avx2 but CPU lacks AVX2");
            return Backend::avx2;
        }
        throw std::runtime_error("unknown METROSIM_KERNELS value: " + s);
    }
    return avx2_supported() ? Backend::avx2 : Backend::scalar;
}

Backend& state() {
    static Backend b = pick_default();
    return b;
}

}  // namespace

bool avx2_supported() {
#if defined(METROSIM_HAVE_AVX2)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

Backend active_backend() { return state(); }

void set_backend(Backend b) {
    if (b == Backend::avx2 && !avx2_supported())
        throw std::runtime_error("AVX2 backend requested but not available");
    state() = b;
}

std::string backend_name(Backend b) {
    return b == Backend::avx2 ? "avx2" : "scalar";
}

#if defined(METROSIM_HAVE_AVX2)
#define METROSIM_DISPATCH(fn, ...)                         \
    do {                                                   \
        if (state() == Backend::avx2)                      \
            return detail::fn##_avx2(__VA_ARGS__);         \
        return detail::fn##_scalar(__VA_ARGS__);           \
    } while (0)
#else
#define METROSIM_DISPATCH(fn, ...) return detail::fn##_scalar(__VA_ARGS__)
#endif

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    METROSIM_DISPATCH(axpy, alpha, x, y, n);
}

double dot(const double* x, const double* y, std::size_t n) {
    METROSIM_DISPATCH(dot, x, y, n);
}

void matvec(const double* w, const double* x, const double* b, double* y,
            std::size_t rows, std::size_t cols) {
    METROSIM_DISPATCH(matvec, w, x, b, y, rows, cols);
}

void matvec_t(const double* w, const double* x, double* y,
              std::size_t rows, std::size_t cols) {
    METROSIM_DISPATCH(matvec_t, w, x, y, rows, cols);
}

void ger(double alpha, const double* x, const double* y, double* a,
         std::size_t m, std::size_t n) {
    METROSIM_DISPATCH(ger, alpha, x, y, a, m, n);
}

void adam_update(double* p, const double* g, double* m, double* v,
                 std::size_t n, double lr, double beta1, double beta2,
                 double eps, long t) {
    METROSIM_DISPATCH(adam_update, p, g, m, v, n, lr, beta1, beta2, eps, t);
}

#undef METROSIM_DISPATCH

}  // namespace metrosim::kernels
