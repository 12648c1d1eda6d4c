// Kernel lane tests: the scalar lane against naive oracles, then the AVX2
// lane (when the CPU has it) against the scalar lane on the same buffers.
// Reductions and FMA-carrying kernels are allowed rounding-level slack; the
// elementwise kernels must match exactly.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <vector>

#include "groupseg/kernels.hpp"
#include "groupseg/rng.hpp"
#include "oracles.hpp"

using namespace groupseg;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double scale = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = scale * (rng.uniform() * 2.0 - 1.0);
    return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::fabs(a[i] - b[i]));
    }
    return worst;
}

}  // namespace

TEST_CASE("scalar elementwise kernels match directly computed values") {
    const Kernels& k = scalar_kernels();
    Rng rng(7);
    for (std::size_t n : {1u, 3u, 8u, 17u, 100u}) {
        auto a = random_vec(rng, n), b = random_vec(rng, n);
        std::vector<double> c(n);
        k.add(a.data(), b.data(), c.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(c[i] == a[i] + b[i]);
        k.sub(a.data(), b.data(), c.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(c[i] == a[i] - b[i]);
        k.mul(a.data(), b.data(), c.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(c[i] == a[i] * b[i]);
        k.scale(0.5, a.data(), c.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(c[i] == 0.5 * a[i]);
        std::vector<double> y = b;
        k.axpy(2.0, a.data(), y.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(y[i] == doctest::Approx(b[i] + 2.0 * a[i]).epsilon(1e-15));
    }
}

TEST_CASE("scalar reductions match extended-precision oracles") {
    const Kernels& k = scalar_kernels();
    Rng rng(13);
    for (std::size_t n : {1u, 5u, 64u, 1000u}) {
        auto a = random_vec(rng, n), b = random_vec(rng, n);
        CHECK(k.sum(a.data(), n) == doctest::Approx(static_cast<double>(oracles::sum(a))).epsilon(1e-12));
        CHECK(k.dot(a.data(), b.data(), n) == doctest::Approx(oracles::dot(a, b)).epsilon(1e-12));
        double mx = a[0];
        for (double v : a) mx = std::max(mx, v);
        CHECK(k.max(a.data(), n) == mx);
    }
}

TEST_CASE("scalar matmul variants match the triple-loop oracle") {
    const Kernels& k = scalar_kernels();
    Rng rng(19);
    struct Dims { std::size_t m, kk, n; };
    for (Dims d : {Dims{1, 1, 1}, Dims{2, 3, 4}, Dims{8, 8, 8}, Dims{5, 17, 9}, Dims{16, 64, 16}}) {
        auto a = random_vec(rng, d.m * d.kk);
        auto b = random_vec(rng, d.kk * d.n);
        auto want = oracles::matmul(a, b, d.m, d.kk, d.n);

        std::vector<double> c(d.m * d.n, 42.0);
        k.matmul_nn(a.data(), b.data(), c.data(), d.m, d.kk, d.n, false);
        CHECK(max_abs_diff(c, want) < 1e-12);

        // nt: feed b transposed; result must be identical.
        std::vector<double> bt(d.n * d.kk);
        for (std::size_t i = 0; i < d.kk; ++i)
            for (std::size_t j = 0; j < d.n; ++j) bt[j * d.kk + i] = b[i * d.n + j];
        k.matmul_nt(a.data(), bt.data(), c.data(), d.m, d.kk, d.n, false);
        CHECK(max_abs_diff(c, want) < 1e-12);

        // tn: feed a transposed.
        std::vector<double> at(d.kk * d.m);
        for (std::size_t i = 0; i < d.m; ++i)
            for (std::size_t j = 0; j < d.kk; ++j) at[j * d.m + i] = a[i * d.kk + j];
        k.matmul_tn(at.data(), b.data(), c.data(), d.m, d.kk, d.n, false);
        CHECK(max_abs_diff(c, want) < 1e-12);

        // accumulate adds onto the previous contents.
        std::vector<double> acc(d.m * d.n, 1.0);
        k.matmul_nn(a.data(), b.data(), acc.data(), d.m, d.kk, d.n, true);
        for (std::size_t i = 0; i < acc.size(); ++i) {
            CHECK(acc[i] == doctest::Approx(1.0 + want[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("avx2 lane agrees with the scalar lane") {
    const Kernels* avx = avx2_kernels();
    if (avx == nullptr) {
        MESSAGE("avx2 unavailable on this host; lane equivalence skipped");
        return;
    }
    const Kernels& ref = scalar_kernels();
    Rng rng(29);
    for (std::size_t n : {1u, 4u, 7u, 32u, 1023u}) {
        auto a = random_vec(rng, n, 3.0), b = random_vec(rng, n, 3.0);
        std::vector<double> c1(n), c2(n);
        ref.add(a.data(), b.data(), c1.data(), n);
        avx->add(a.data(), b.data(), c2.data(), n);
        CHECK(max_abs_diff(c1, c2) == 0.0);
        ref.mul(a.data(), b.data(), c1.data(), n);
        avx->mul(a.data(), b.data(), c2.data(), n);
        CHECK(max_abs_diff(c1, c2) == 0.0);

        CHECK(avx->sum(a.data(), n) == doctest::Approx(ref.sum(a.data(), n)).epsilon(1e-13));
        CHECK(avx->dot(a.data(), b.data(), n) == doctest::Approx(ref.dot(a.data(), b.data(), n)).epsilon(1e-13));
        CHECK(avx->max(a.data(), n) == ref.max(a.data(), n));
    }
    struct Dims { std::size_t m, kk, n; };
    for (Dims d : {Dims{1, 1, 1}, Dims{3, 5, 7}, Dims{64, 64, 64}, Dims{13, 31, 4}}) {
        auto a = random_vec(rng, d.m * d.kk);
        auto b = random_vec(rng, d.kk * d.n);
        auto bt = random_vec(rng, d.n * d.kk);
        auto at = random_vec(rng, d.kk * d.m);
        std::vector<double> c1(d.m * d.n), c2(d.m * d.n);
        ref.matmul_nn(a.data(), b.data(), c1.data(), d.m, d.kk, d.n, false);
        avx->matmul_nn(a.data(), b.data(), c2.data(), d.m, d.kk, d.n, false);
        CHECK(max_abs_diff(c1, c2) < 1e-12);
        ref.matmul_nt(a.data(), bt.data(), c1.data(), d.m, d.kk, d.n, false);
        avx->matmul_nt(a.data(), bt.data(), c2.data(), d.m, d.kk, d.n, false);
        CHECK(max_abs_diff(c1, c2) < 1e-12);
        ref.matmul_tn(at.data(), b.data(), c1.data(), d.m, d.kk, d.n, false);
        avx->matmul_tn(at.data(), b.data(), c2.data(), d.m, d.kk, d.n, false);
        CHECK(max_abs_diff(c1, c2) < 1e-12);
    }
}

TEST_CASE("lane selection honors set_kernel_lane") {
    set_kernel_lane(KernelLane::Scalar);
    CHECK(std::string(kernels().name) == "scalar");
    if (avx2_kernels() != nullptr) {
        set_kernel_lane(KernelLane::Avx2);
        CHECK(std::string(kernels().name) == "avx2");
        set_kernel_lane(KernelLane::Scalar);
    }
}
