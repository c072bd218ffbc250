#pragma once

#include <cstddef>
#include <string>

namespace metrosim::kernels {

/// Which implementation of the numeric kernels is in use.
enum class Backend {
    scalar,  ///< portable reference loops
    avx2,    ///< 4-wide double lanes via AVX2 intrinsics
};

/// Backend selected for this process.  Defaults to the widest instruction
/// set the CPU supports; the METROSIM_KERNELS environment variable
/// ("scalar" or "avx2") or set_backend() overrides the choice.
Backend active_backend();

/// Force a specific backend.  Throws std::runtime_error if the requested
/// backend is not available on this machine.
void set_backend(Backend b);

/// True if the running CPU can execute the AVX2 backend.
bool avx2_supported();

std::string backend_name(Backend b);

// All kernels operate on contiguous double arrays.  The elementwise
// kernels (axpy, ger, matvec_t, adam_update) produce bitwise-identical
// results on every backend because each output element is computed by
// the same scalar expression; the reductions (dot, matvec) may differ
// in the last few ulps because the vector backend reassociates the sum.

/// y[i] += alpha * x[i]
void axpy(double alpha, const double* x, double* y, std::size_t n);

/// sum_i x[i] * y[i]
double dot(const double* x, const double* y, std::size_t n);

/// y = W x + b, with W row-major (rows x cols); b may be null.
void matvec(const double* w, const double* x, const double* b, double* y,
            std::size_t rows, std::size_t cols);

/// y += W^T x, with W row-major (rows x cols), x length rows, y length cols.
void matvec_t(const double* w, const double* x, double* y,
              std::size_t rows, std::size_t cols);

/// A += alpha * x y^T, with A row-major (m x n).
void ger(double alpha, const double* x, const double* y, double* a,
         std::size_t m, std::size_t n);

/// One Adam step over n parameters.  m/v are the first/second moment
/// accumulators; t is the 1-based step count used for bias correction.
void adam_update(double* p, const double* g, double* m, double* v,
                 std::size_t n, double lr, double beta1, double beta2,
                 double eps, long t);

namespace detail {

// Per-backend entry points, exercised directly by the equivalence tests.
void axpy_scalar(double alpha, const double* x, double* y, std::size_t n);
double dot_scalar(const double* x, const double* y, std::size_t n);
void matvec_scalar(const double* w, const double* x, const double* b, double* y,
                   std::size_t rows, std::size_t cols);
void matvec_t_scalar(const double* w, const double* x, double* y,
                     std::size_t rows, std::size_t cols);
void ger_scalar(double alpha, const double* x, const double* y, double* a,
                std::size_t m, std::size_t n);
void adam_update_scalar(double* p, const double* g, double* m, double* v,
                        std::size_t n, double lr, double beta1, double beta2,
                        double eps, long t);

#if defined(METROSIM_HAVE_AVX2)
void axpy_avx2(double alpha, const double* x, double* y, std::size_t n);
double dot_avx2(const double* x, const double* y, std::size_t n);
void matvec_avx2(const double* w, const double* x, const double* b, double* y,
                 std::size_t rows, std::size_t cols);
void matvec_t_avx2(const double* w, const double* x, double* y,
                   std::size_t rows, std::size_t cols);
void ger_avx2(double alpha, const double* x, const double* y, double* a,
              std::size_t m, std::size_t n);
void adam_update_avx2(double* p, const double* g, double* m, double* v,
                      std::size_t n, double lr, double beta1, double beta2,
                      double eps, long t);
#endif

}  // namespace detail

}  // namespace metrosim::kernels
