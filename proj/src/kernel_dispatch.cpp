#include <stdexcept>

#include "qosc/kernels.hpp"

namespace qosc::kern {

#if !QOSC_HAVE_AVX2_SOURCE
void run_pairs_avx2(PairBatch&, PairRoots&, const PairRunConfig&, const PairSink&) {
    throw std::runtime_error("vector kernel not built into this binary");
}
#endif

bool avx2_kernel_available() {
#if QOSC_HAVE_AVX2_SOURCE
    return __builtin_cpu_supports("avx2") != 0;
#else
    return false;
#endif
}

PairKernelFn pair_kernel() {
    return avx2_kernel_available() ? &run_pairs_avx2 : &run_pairs_scalar;
}

const char* pair_kernel_name() {
    return avx2_kernel_available() ? "avx2" : "scalar";
}

}  // namespace qosc::kern
