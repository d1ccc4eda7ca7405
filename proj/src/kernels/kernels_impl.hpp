#pragma once
// Shared definitions for the kernel variants. Not installed.

#include "ptmc/kernels.hpp"

namespace ptmc::kernels::detail {

inline constexpr std::size_t kLanes = 8;

inline constexpr std::uint32_t temper_word(std::uint32_t y) {
    y ^= y >> 11;
    y ^= (y << 7) & 0x9d2c5680u;
    y ^= (y << 15) & 0xefc60000u;
    y ^= y >> 18;
    return y;
}

inline constexpr float word_to_unit(std::uint32_t word) {
    return static_cast<float>(word >> 8) * 0x1.0p-24f;
}

// Lane combination order shared by all variants:
// ((l0+l4) + (l2+l6)) + ((l1+l5) + (l3+l7))
inline double combine_lanes(const double* lanes) {
    const double s0 = lanes[0] + lanes[4];
    const double s1 = lanes[1] + lanes[5];
    const double s2 = lanes[2] + lanes[6];
    const double s3 = lanes[3] + lanes[7];
    return (s0 + s2) + (s1 + s3);
}

void mt_twist_scalar(std::uint32_t* mt);
void mt_temper_scalar(const std::uint32_t* raw, std::uint32_t* out, std::size_t count);
void mt_temper_unit_scalar(const std::uint32_t* raw, float* out, std::size_t count);
double signed_sum_scalar(const float* weights, const std::int8_t* signs, std::size_t count);
double bond_sum_scalar(const std::uint32_t* first, const std::uint32_t* second, const float* weights,
                       std::size_t count, const std::int8_t* spins);

#if defined(__x86_64__) || defined(_M_X64)
#define PTMC_HAVE_AVX2_KERNELS 1
bool cpu_has_avx2();
void mt_twist_avx2(std::uint32_t* mt);
void mt_temper_avx2(const std::uint32_t* raw, std::uint32_t* out, std::size_t count);
void mt_temper_unit_avx2(const std::uint32_t* raw, float* out, std::size_t count);
double signed_sum_avx2(const float* weights, const std::int8_t* signs, std::size_t count);
double bond_sum_avx2(const std::uint32_t* first, const std::uint32_t* second, const float* weights,
                     std::size_t count, const std::int8_t* spins);
#endif

}  // namespace ptmc::kernels::detail
