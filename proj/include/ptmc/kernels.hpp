#pragma once
// Data-parallel inner loops with a scalar reference and ISA-specific variants.
//
// Every variant must produce bit-identical results to the scalar reference:
// simulation trajectories are compared byte-for-byte across worker counts and
// checkpoint boundaries, so a kernel that merely agrees "within tolerance"
// would break replay. Reductions therefore use a fixed 8-lane striping and a
// fixed lane-combination tree in every implementation.

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace ptmc::kernels {

inline constexpr std::size_t kMtStateLength = 624;

/// Number of bytes that may be read past the last spin by a gather kernel.
inline constexpr std::size_t kSpinGatherPadding = 3;

struct KernelTable {
    std::string_view name;

    /// Regenerates all 624 words of an MT19937 state in place.
    void (*mt_twist)(std::uint32_t* state);

    /// Applies MT19937 output tempering to `count` raw state words.
    void (*mt_temper)(const std::uint32_t* raw, std::uint32_t* out, std::size_t count);

    /// Tempers `count` raw words and maps each to (word >> 8) * 2^-24.
    void (*mt_temper_unit)(const std::uint32_t* raw, float* out, std::size_t count);

    /// sum_k weights[k] * signs[k], accumulated in double.
    double (*signed_sum)(const float* weights, const std::int8_t* signs, std::size_t count);

    /// sum_k weights[k] * spins[first[k]] * spins[second[k]], accumulated in double.
    /// `spins` must be readable for kSpinGatherPadding bytes past its end.
    double (*bond_sum)(const std::uint32_t* first, const std::uint32_t* second, const float* weights,
                       std::size_t count, const std::int8_t* spins);
};

const KernelTable& scalar_kernels();

/// AVX2 variant, or nullptr when not compiled in or the CPU lacks AVX2.
const KernelTable* avx2_kernels();

/// Table used by the engine. Chosen once: the best variant the CPU supports,
/// unless the PTMC_KERNELS environment variable names another ("scalar", "avx2").
const KernelTable& active_kernels();

}  // namespace ptmc::kernels
