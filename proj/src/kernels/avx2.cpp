// AVX2 variants. Functions carry target attributes instead of the whole
// translation unit being built with -mavx2, so nothing here can leak AVX2
// code into paths taken on CPUs without it.

#include "kernels_impl.hpp"

#if defined(PTMC_HAVE_AVX2_KERNELS)

#include <immintrin.h>

#define PTMC_AVX2 __attribute__((target("avx2")))

namespace ptmc::kernels::detail {

namespace {

constexpr std::size_t kShift = 397;

PTMC_AVX2 inline __m256i twist8(__m256i cur, __m256i next, __m256i far) {
    const __m256i upper = _mm256_set1_epi32(static_cast<int>(0x80000000u));
    const __m256i lower = _mm256_set1_epi32(0x7fffffff);
    const __m256i matrix = _mm256_set1_epi32(static_cast<int>(0x9908b0dfu));
    const __m256i one = _mm256_set1_epi32(1);
    const __m256i y = _mm256_or_si256(_mm256_and_si256(cur, upper), _mm256_and_si256(next, lower));
    const __m256i odd = _mm256_sub_epi32(_mm256_setzero_si256(), _mm256_and_si256(y, one));
    return _mm256_xor_si256(_mm256_xor_si256(far, _mm256_srli_epi32(y, 1)), _mm256_and_si256(odd, matrix));
}

PTMC_AVX2 inline __m256i load8(const std::uint32_t* p) {
    return _mm256_loadu_si256(reinterpret_cast<const __m256i*>(p));
}

PTMC_AVX2 inline void store8(std::uint32_t* p, __m256i v) {
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(p), v);
}

PTMC_AVX2 inline __m256i temper8(__m256i y) {
    y = _mm256_xor_si256(y, _mm256_srli_epi32(y, 11));
    y = _mm256_xor_si256(y, _mm256_and_si256(_mm256_slli_epi32(y, 7), _mm256_set1_epi32(static_cast<int>(0x9d2c5680u))));
    y = _mm256_xor_si256(y, _mm256_and_si256(_mm256_slli_epi32(y, 15), _mm256_set1_epi32(static_cast<int>(0xefc60000u))));
    return _mm256_xor_si256(y, _mm256_srli_epi32(y, 18));
}

inline std::uint32_t twist_word(std::uint32_t cur, std::uint32_t next, std::uint32_t far) {
    const std::uint32_t y = (cur & 0x80000000u) | (next & 0x7fffffffu);
    return far ^ (y >> 1) ^ ((0u - (y & 1u)) & 0x9908b0dfu);
}

// Adds 8 float terms into the two double accumulators holding lanes 0-3 and 4-7.
PTMC_AVX2 inline void accumulate8(__m256 terms, __m256d& lo, __m256d& hi) {
    lo = _mm256_add_pd(lo, _mm256_cvtps_pd(_mm256_castps256_ps128(terms)));
    hi = _mm256_add_pd(hi, _mm256_cvtps_pd(_mm256_extractf128_ps(terms, 1)));
}

PTMC_AVX2 inline double reduce(__m256d lo, __m256d hi) {
    const __m256d s = _mm256_add_pd(lo, hi);
    const __m128d t = _mm_add_pd(_mm256_castpd256_pd128(s), _mm256_extractf128_pd(s, 1));
    return _mm_cvtsd_f64(t) + _mm_cvtsd_f64(_mm_unpackhi_pd(t, t));
}

}  // namespace

bool cpu_has_avx2() { return __builtin_cpu_supports("avx2"); }

PTMC_AVX2 void mt_twist_avx2(std::uint32_t* mt) {
    constexpr std::size_t n = kMtStateLength;
    std::size_t k = 0;
    // First span reads only not-yet-updated words at k + kShift.
    for (; k + 8 <= n - kShift; k += 8) {
        store8(mt + k, twist8(load8(mt + k), load8(mt + k + 1), load8(mt + k + kShift)));
    }
    for (; k < n - kShift; ++k) mt[k] = twist_word(mt[k], mt[k + 1], mt[k + kShift]);
    // Second span reads words already updated this round, all below k.
    for (; k + 8 <= n - 1; k += 8) {
        store8(mt + k, twist8(load8(mt + k), load8(mt + k + 1), load8(mt + k + kShift - n)));
    }
    for (; k < n - 1; ++k) mt[k] = twist_word(mt[k], mt[k + 1], mt[k + kShift - n]);
    mt[n - 1] = twist_word(mt[n - 1], mt[0], mt[kShift - 1]);
}

PTMC_AVX2 void mt_temper_avx2(const std::uint32_t* raw, std::uint32_t* out, std::size_t count) {
    std::size_t i = 0;
    for (; i + 8 <= count; i += 8) store8(out + i, temper8(load8(raw + i)));
    for (; i < count; ++i) out[i] = temper_word(raw[i]);
}

PTMC_AVX2 void mt_temper_unit_avx2(const std::uint32_t* raw, float* out, std::size_t count) {
    const __m256 scale = _mm256_set1_ps(0x1.0p-24f);
    std::size_t i = 0;
    for (; i + 8 <= count; i += 8) {
        const __m256i top = _mm256_srli_epi32(temper8(load8(raw + i)), 8);
        _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_cvtepi32_ps(top), scale));
    }
    for (; i < count; ++i) out[i] = word_to_unit(temper_word(raw[i]));
}

PTMC_AVX2 double signed_sum_avx2(const float* weights, const std::int8_t* signs, std::size_t count) {
    __m256d lo = _mm256_setzero_pd();
    __m256d hi = _mm256_setzero_pd();
    const std::size_t full = count - count % kLanes;
    for (std::size_t k = 0; k < full; k += kLanes) {
        const __m128i packed = _mm_loadl_epi64(reinterpret_cast<const __m128i*>(signs + k));
        const __m256 s = _mm256_cvtepi32_ps(_mm256_cvtepi8_epi32(packed));
        accumulate8(_mm256_mul_ps(_mm256_loadu_ps(weights + k), s), lo, hi);
    }
    double total = reduce(lo, hi);
    for (std::size_t k = full; k < count; ++k) {
        total += static_cast<double>(weights[k] * static_cast<float>(signs[k]));
    }
    return total;
}

PTMC_AVX2 double bond_sum_avx2(const std::uint32_t* first, const std::uint32_t* second, const float* weights,
                               std::size_t count, const std::int8_t* spins) {
    __m256d lo = _mm256_setzero_pd();
    __m256d hi = _mm256_setzero_pd();
    const auto* base = reinterpret_cast<const int*>(spins);
    const std::size_t full = count - count % kLanes;
    for (std::size_t k = 0; k < full; k += kLanes) {
        // 32-bit gathers at byte offsets; the spin sits in the low byte.
        __m256i a = _mm256_i32gather_epi32(base, load8(first + k), 1);
        __m256i b = _mm256_i32gather_epi32(base, load8(second + k), 1);
        a = _mm256_srai_epi32(_mm256_slli_epi32(a, 24), 24);
        b = _mm256_srai_epi32(_mm256_slli_epi32(b, 24), 24);
        const __m256 product = _mm256_cvtepi32_ps(_mm256_mullo_epi32(a, b));
        accumulate8(_mm256_mul_ps(_mm256_loadu_ps(weights + k), product), lo, hi);
    }
    double total = reduce(lo, hi);
    for (std::size_t k = full; k < count; ++k) {
        const int product = spins[first[k]] * spins[second[k]];
        total += static_cast<double>(weights[k] * static_cast<float>(product));
    }
    return total;
}

}  // namespace ptmc::kernels::detail

#endif
