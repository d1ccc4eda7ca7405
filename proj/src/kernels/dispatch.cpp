#include <cstdlib>
#include <iostream>
#include <string_view>

#include "kernels_impl.hpp"

namespace ptmc::kernels {

const KernelTable& scalar_kernels() {
    static const KernelTable table{
        "scalar",
        detail::mt_twist_scalar,
        detail::mt_temper_scalar,
        detail::mt_temper_unit_scalar,
        detail::signed_sum_scalar,
        detail::bond_sum_scalar,
    };
    return table;
}

const KernelTable* avx2_kernels() {
#if defined(PTMC_HAVE_AVX2_KERNELS)
    static const KernelTable table{
        "avx2",
        detail::mt_twist_avx2,
        detail::mt_temper_avx2,
        detail::mt_temper_unit_avx2,
        detail::signed_sum_avx2,
        detail::bond_sum_avx2,
    };
    static const bool supported = detail::cpu_has_avx2();
    return supported ? &table : nullptr;
#else
    return nullptr;
#endif
}

namespace {

const KernelTable& select() {
    const char* requested = std::getenv("PTMC_KERNELS");
    if (requested != nullptr) {
        const std::string_view name{requested};
        if (name == "scalar") return scalar_kernels();
        if (name == "avx2") {
            if (const auto* t = avx2_kernels()) return *t;
            std::clog << "ptmc: PTMC_KERNELS=avx2 unavailable on this CPU, using scalar\n";
            return scalar_kernels();
        }
        std::clog << "ptmc: unknown PTMC_KERNELS value '" << name << "', ignoring\n";
    }
    if (const auto* t = avx2_kernels()) return *t;
    return scalar_kernels();
}

}  // namespace

const KernelTable& active_kernels() {
    static const KernelTable& table = select();
    return table;
}

}  // namespace ptmc::kernels
