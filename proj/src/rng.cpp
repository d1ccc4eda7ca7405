#include "ptmc/rng.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace ptmc {

RngStream::RngStream(std::uint32_t seed) {
    state_[0] = seed;
    for (std::uint32_t i = 1; i < kStateLength; ++i) {
        state_[i] = 1812433253u * (state_[i - 1] ^ (state_[i - 1] >> 30)) + i;
    }
    index_ = kStateLength;
}

void RngStream::regenerate() {
    kernels::active_kernels().mt_twist(state_.data());
    index_ = 0;
}

void RngStream::fill_u32(std::span<std::uint32_t> out) {
    const auto& k = kernels::active_kernels();
    while (!out.empty()) {
        if (index_ == kStateLength) regenerate();
        const std::size_t n = std::min<std::size_t>(out.size(), kStateLength - index_);
        k.mt_temper(state_.data() + index_, out.data(), n);
        index_ += static_cast<std::uint32_t>(n);
        out = out.subspan(n);
    }
}

void RngStream::fill_unit(std::span<float> out) {
    const auto& k = kernels::active_kernels();
    while (!out.empty()) {
        if (index_ == kStateLength) regenerate();
        const std::size_t n = std::min<std::size_t>(out.size(), kStateLength - index_);
        k.mt_temper_unit(state_.data() + index_, out.data(), n);
        index_ += static_cast<std::uint32_t>(n);
        out = out.subspan(n);
    }
}

void RngStream::encode(ByteWriter& out) const {
    out.put_all(std::span<const std::uint32_t>{state_});
    out.put(index_);
}

RngStream RngStream::decode(ByteReader& in) {
    RngStream s;
    in.get_all(std::span<std::uint32_t>{s.state_});
    s.index_ = in.get<std::uint32_t>();
    if (s.index_ > kStateLength) {
        throw FormatError("RNG stream index " + std::to_string(s.index_) + " out of range");
    }
    return s;
}

std::uint32_t regional_seed(std::uint32_t start_seed, std::uint64_t chain, std::uint64_t threads_per_chain,
                            std::uint64_t thread) {
    if (thread >= threads_per_chain) {
        throw std::invalid_argument("regional_seed: thread " + std::to_string(thread) +
                                    " >= threads_per_chain " + std::to_string(threads_per_chain));
    }
    return start_seed + static_cast<std::uint32_t>(chain * threads_per_chain + thread);
}

}  // namespace ptmc
