#pragma once

#include <cstddef>
#include <string>

namespace groupseg {

// Low-level dense double-precision kernels. Every entry has a scalar
// reference implementation; on x86-64 with AVX2+FMA a vectorized variant is
// selected at runtime. The two lanes are equivalence-tested against each
// other; reductions and FMA-using kernels may differ by rounding only.
struct Kernels {
    // c = a op b, elementwise, n values
    void (*add)(const double* a, const double* b, double* c, std::size_t n);
    void (*sub)(const double* a, const double* b, double* c, std::size_t n);
    void (*mul)(const double* a, const double* b, double* c, std::size_t n);

    // y = alpha * x  /  y += alpha * x
    void (*scale)(double alpha, const double* x, double* y, std::size_t n);
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

    double (*sum)(const double* x, std::size_t n);
    double (*max)(const double* x, std::size_t n);  // n >= 1
    double (*dot)(const double* a, const double* b, std::size_t n);

    // Row-major matrix products. When accumulate is false the output is
    // overwritten, otherwise added to.
    // c[m x n] = a[m x k] * b[k x n]
    void (*matmul_nn)(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n,
                      bool accumulate);
    // c[m x n] = a[m x k] * b[n x k]^T
    void (*matmul_nt)(const double* a, const double* bt, double* c,
                      std::size_t m, std::size_t k, std::size_t n,
                      bool accumulate);
    // c[m x n] = a[k x m]^T * b[k x n]
    void (*matmul_tn)(const double* at, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n,
                      bool accumulate);

    const char* name;
};

enum class KernelLane { Scalar, Avx2 };

// The scalar reference lane; always available.
const Kernels& scalar_kernels();

// AVX2 lane, or nullptr when unsupported by the CPU or not compiled in.
const Kernels* avx2_kernels();

// Active lane. Chosen once: the GROUPSEG_KERNELS environment variable
// ("scalar", "avx2", "auto") wins, otherwise the best supported lane.
const Kernels& kernels();

// Force a lane, mainly for equivalence tests. Throws if unavailable.
void set_kernel_lane(KernelLane lane);

}  // namespace groupseg
