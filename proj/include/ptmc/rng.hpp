#pragma once
// MT19937 streams, one per concurrently executing unit, plus the two seeding
// schemes: one stream per chain, or one stream per (chain, region) pair.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

#include "ptmc/bytes.hpp"
#include "ptmc/kernels.hpp"

namespace ptmc {

class RngStream {
public:
    static constexpr std::size_t kStateLength = kernels::kMtStateLength;
    /// Serialized size: 624 state words plus the index.
    static constexpr std::size_t kEncodedBytes = (kStateLength + 1) * sizeof(std::uint32_t);

    /// Standard MT19937 initialization (Knuth multiplier 1812433253).
    explicit RngStream(std::uint32_t seed = 5489u);

    std::uint32_t next_u32() {
        if (index_ == kStateLength) regenerate();
        return temper(state_[index_++]);
    }

    /// (next_u32() >> 8) * 2^-24: a float in [0, 1) from exactly one word.
    float next_unit_f32() { return static_cast<float>(next_u32() >> 8) * 0x1.0p-24f; }

    /// Equivalent to calling next_u32() out.size() times, using the batch kernels.
    void fill_u32(std::span<std::uint32_t> out);

    /// Equivalent to calling next_unit_f32() out.size() times, using the batch kernels.
    void fill_unit(std::span<float> out);

    const std::array<std::uint32_t, kStateLength>& state() const { return state_; }
    std::uint32_t index() const { return index_; }

    void encode(ByteWriter& out) const;
    static RngStream decode(ByteReader& in);

    friend bool operator==(const RngStream&, const RngStream&) = default;

private:
    static constexpr std::uint32_t temper(std::uint32_t y) {
        y ^= y >> 11;
        y ^= (y << 7) & 0x9d2c5680u;
        y ^= (y << 15) & 0xefc60000u;
        y ^= y >> 18;
        return y;
    }

    void regenerate();

    std::array<std::uint32_t, kStateLength> state_{};
    std::uint32_t index_ = kStateLength;
};

inline RngStream init_stream(std::uint32_t seed) { return RngStream{seed}; }

/// start_seed + chain, wrapping.
constexpr std::uint32_t coarse_seed(std::uint32_t start_seed, std::uint64_t chain) {
    return start_seed + static_cast<std::uint32_t>(chain);
}

/// start_seed + chain * threads_per_chain + thread, wrapping.
/// Throws std::invalid_argument when thread >= threads_per_chain.
std::uint32_t regional_seed(std::uint32_t start_seed, std::uint64_t chain, std::uint64_t threads_per_chain,
                            std::uint64_t thread);

}  // namespace ptmc
