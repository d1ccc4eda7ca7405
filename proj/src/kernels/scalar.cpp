#include "kernels_impl.hpp"

namespace ptmc::kernels::detail {

namespace {

constexpr std::uint32_t kUpperMask = 0x80000000u;
constexpr std::uint32_t kLowerMask = 0x7fffffffu;
constexpr std::uint32_t kMatrixA = 0x9908b0dfu;
constexpr std::size_t kShift = 397;

inline std::uint32_t twist_word(std::uint32_t cur, std::uint32_t next, std::uint32_t far) {
    const std::uint32_t y = (cur & kUpperMask) | (next & kLowerMask);
    return far ^ (y >> 1) ^ ((0u - (y & 1u)) & kMatrixA);
}

}  // namespace

void mt_twist_scalar(std::uint32_t* mt) {
    constexpr std::size_t n = kMtStateLength;
    std::size_t k = 0;
    for (; k < n - kShift; ++k) mt[k] = twist_word(mt[k], mt[k + 1], mt[k + kShift]);
    for (; k < n - 1; ++k) mt[k] = twist_word(mt[k], mt[k + 1], mt[k + kShift - n]);
    mt[n - 1] = twist_word(mt[n - 1], mt[0], mt[kShift - 1]);
}

void mt_temper_scalar(const std::uint32_t* raw, std::uint32_t* out, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) out[i] = temper_word(raw[i]);
}

void mt_temper_unit_scalar(const std::uint32_t* raw, float* out, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) out[i] = word_to_unit(temper_word(raw[i]));
}

double signed_sum_scalar(const float* weights, const std::int8_t* signs, std::size_t count) {
    double lanes[kLanes] = {};
    const std::size_t full = count - count % kLanes;
    for (std::size_t k = 0; k < full; k += kLanes) {
        for (std::size_t l = 0; l < kLanes; ++l) {
            lanes[l] += static_cast<double>(weights[k + l] * static_cast<float>(signs[k + l]));
        }
    }
    double total = combine_lanes(lanes);
    for (std::size_t k = full; k < count; ++k) {
        total += static_cast<double>(weights[k] * static_cast<float>(signs[k]));
    }
    return total;
}

double bond_sum_scalar(const std::uint32_t* first, const std::uint32_t* second, const float* weights,
                       std::size_t count, const std::int8_t* spins) {
    double lanes[kLanes] = {};
    const std::size_t full = count - count % kLanes;
    for (std::size_t k = 0; k < full; k += kLanes) {
        for (std::size_t l = 0; l < kLanes; ++l) {
            const int product = spins[first[k + l]] * spins[second[k + l]];
            lanes[l] += static_cast<double>(weights[k + l] * static_cast<float>(product));
        }
    }
    double total = combine_lanes(lanes);
    for (std::size_t k = full; k < count; ++k) {
        const int product = spins[first[k]] * spins[second[k]];
        total += static_cast<double>(weights[k] * static_cast<float>(product));
    }
    return total;
}

}  // namespace ptmc::kernels::detail
