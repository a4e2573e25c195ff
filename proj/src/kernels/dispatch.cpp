#include "nplmc/kernels.hpp"

#include <cstdlib>
#include <string_view>

namespace nplmc::kernels {

#if NPLMC_HAVE_AVX2
namespace detail {
const KernelTable &avx2_table();
}
#endif

const KernelTable *avx2() {
#if NPLMC_HAVE_AVX2
    static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return supported ? &detail::avx2_table() : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable &active() {
    static const KernelTable &table = [] () -> const KernelTable & {
        const char *forced = std::getenv("NPLMC_SIMD");
        if (forced != nullptr && std::string_view(forced) == "scalar") {
            return scalar();
        }
        if (const auto *simd = avx2()) {
            return *simd;
        }
        return scalar();
    }();
    return table;
}

} // namespace nplmc::kernels
