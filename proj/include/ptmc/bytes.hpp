#pragma once
// Little-endian fixed-width encoding used by checkpoints and state comparison.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace ptmc {

static_assert(std::endian::native == std::endian::little,
              "binary state encoding assumes a little-endian host");

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ByteWriter {
public:
    template <typename T>
        requires std::is_arithmetic_v<T>
    void put(T value) {
        const auto* p = reinterpret_cast<const std::byte*>(&value);
        bytes_.insert(bytes_.end(), p, p + sizeof(T));
    }

    template <typename T>
        requires std::is_arithmetic_v<T>
    void put_all(std::span<const T> values) {
        const auto* p = reinterpret_cast<const std::byte*>(values.data());
        bytes_.insert(bytes_.end(), p, p + values.size_bytes());
    }

    void put_raw(std::span<const std::byte> raw) { bytes_.insert(bytes_.end(), raw.begin(), raw.end()); }

    const std::vector<std::byte>& bytes() const& { return bytes_; }
    std::vector<std::byte> take() && { return std::move(bytes_); }

private:
    std::vector<std::byte> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::byte> bytes) : bytes_(bytes) {}

    template <typename T>
        requires std::is_arithmetic_v<T>
    T get() {
        T value;
        std::memcpy(&value, take(sizeof(T)).data(), sizeof(T));
        return value;
    }

    template <typename T>
        requires std::is_arithmetic_v<T>
    void get_all(std::span<T> out) {
        const auto raw = take(out.size_bytes());
        std::memcpy(out.data(), raw.data(), raw.size());
    }

    std::span<const std::byte> take(std::size_t n) {
        if (n > bytes_.size() - offset_) {
            throw FormatError("truncated data: need " + std::to_string(n) + " bytes at offset " +
                              std::to_string(offset_) + ", have " + std::to_string(bytes_.size() - offset_));
        }
        const auto out = bytes_.subspan(offset_, n);
        offset_ += n;
        return out;
    }

    std::size_t remaining() const { return bytes_.size() - offset_; }
    std::size_t offset() const { return offset_; }

private:
    std::span<const std::byte> bytes_;
    std::size_t offset_ = 0;
};

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::span<const std::byte> data, std::uint64_t hash = 0xcbf29ce484222325ull) {
    for (const std::byte b : data) {
        hash ^= static_cast<std::uint64_t>(b);
        hash *= 0x100000001b3ull;
    }
    return hash;
}

}  // namespace ptmc
