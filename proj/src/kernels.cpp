#include "groupseg/kernels.hpp"

#include <cstdlib>
#include <stdexcept>

namespace groupseg {
namespace {

const Kernels* g_active = nullptr;

const Kernels* pick_default() {
    const char* env = std::getenv("GROUPSEG_KERNELS");
    if (env != nullptr) {
        const std::string want(env);
        if (want == "scalar") return &scalar_kernels();
        if (want == "avx2") {
            const Kernels* k = avx2_kernels();
            if (k == nullptr)
                throw std::runtime_error(
                    "GROUPSEG_KERNELS=avx2 but AVX2 is unavailable");
            return k;
        }
        if (want != "auto")
            throw std::runtime_error("unknown GROUPSEG_KERNELS value: " +
                                     want);
    }
    const Kernels* k = avx2_kernels();
    return k != nullptr ? k : &scalar_kernels();
}

}  // namespace

const Kernels& kernels() {
    if (g_active == nullptr) g_active = pick_default();
    return *g_active;
}

void set_kernel_lane(KernelLane lane) {
    if (lane == KernelLane::Scalar) {
        g_active = &scalar_kernels();
        return;
    }
    const Kernels* k = avx2_kernels();
    if (k == nullptr)
        throw std::runtime_error("AVX2 kernel lane unavailable on this CPU");
    g_active = k;
}

}  // namespace groupseg
