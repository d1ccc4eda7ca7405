#include "ptmc/persist.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <system_error>

namespace ptmc::persist {

namespace {

constexpr std::array<char, 8> kMagic = {'P', 'T', 'M', 'C', 'C', 'K', 'P', 'T'};
// magic + version + fingerprint + total_sweeps + payload length
constexpr std::size_t kHeaderBytes = 8 + 4 + 8 + 8 + 8;
constexpr std::size_t kChecksumBytes = 8;

}  // namespace

std::vector<std::byte> encode(const Ensemble& ensemble, const IsingModel& model, const Schedule& schedule) {
    const std::vector<std::byte> payload = encode_ensemble(ensemble);
    ByteWriter w;
    w.put_raw(std::as_bytes(std::span{kMagic}));
    w.put<std::uint32_t>(kFormatVersion);
    w.put<std::uint64_t>(model.fingerprint());
    w.put<std::uint64_t>(schedule.total_sweeps);
    w.put<std::uint64_t>(payload.size());
    w.put_raw(payload);
    w.put<std::uint64_t>(fnv1a64(w.bytes()));
    return std::move(w).take();
}

Checkpoint decode(std::span<const std::byte> bytes, const IsingModel& model) {
    if (bytes.size() < kHeaderBytes + kChecksumBytes) {
        throw CheckpointError("checkpoint truncated: " + std::to_string(bytes.size()) + " bytes");
    }
    if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
        throw CheckpointError("not a checkpoint file (bad magic)");
    }
    ByteReader header(bytes.subspan(kMagic.size()));
    const auto version = header.get<std::uint32_t>();
    if (version != kFormatVersion) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint cp;
    cp.model_fingerprint = header.get<std::uint64_t>();
    cp.schedule.total_sweeps = header.get<std::uint64_t>();
    const auto payload_len = header.get<std::uint64_t>();
    if (payload_len != bytes.size() - kHeaderBytes - kChecksumBytes) {
        throw CheckpointError("checkpoint truncated or padded: payload declares " + std::to_string(payload_len) +
                              " bytes, file holds " + std::to_string(bytes.size() - kHeaderBytes - kChecksumBytes));
    }
    const auto body = bytes.first(bytes.size() - kChecksumBytes);
    std::uint64_t stored = 0;
    std::memcpy(&stored, bytes.data() + body.size(), sizeof(stored));
    if (fnv1a64(body) != stored) throw CheckpointError("checkpoint checksum mismatch (file corrupted)");
    if (cp.model_fingerprint != model.fingerprint()) {
        throw CheckpointError("checkpoint was written for a different model (fingerprint mismatch)");
    }
    ByteReader payload(bytes.subspan(kHeaderBytes, payload_len));
    try {
        cp.ensemble = decode_ensemble(payload);
    } catch (const FormatError& e) {
        throw CheckpointError(std::string("corrupt checkpoint payload: ") + e.what());
    }
    if (payload.remaining() != 0) throw CheckpointError("checkpoint payload has trailing bytes");
    for (const Chain& c : cp.ensemble.chains) {
        if (c.state.size() != model.num_sites()) throw CheckpointError("checkpoint site count does not match model");
    }
    return cp;
}

void save(const Ensemble& ensemble, const IsingModel& model, const Schedule& schedule,
          const std::filesystem::path& path) {
    const auto bytes = encode(ensemble, model, schedule);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) {
            std::error_code ignored;
            std::filesystem::remove(tmp, ignored);
            throw std::runtime_error("write to " + tmp.string() + " failed");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw std::runtime_error("cannot move checkpoint into place at " + path.string());
    }
}

Checkpoint load(const std::filesystem::path& path, const IsingModel& model) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    std::vector<char> raw{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return decode(std::as_bytes(std::span{raw}), model);
}

CheckpointSink::CheckpointSink(std::filesystem::path path, std::chrono::duration<double> interval,
                               const IsingModel& model, Schedule schedule)
    : path_(std::move(path)),
      interval_(interval),
      model_(&model),
      schedule_(schedule),
      last_(std::chrono::steady_clock::now()) {}

void CheckpointSink::operator()(const Ensemble& ensemble, const PhaseRecord&) {
    const auto now = std::chrono::steady_clock::now();
    if (now - last_ >= interval_) save_now(ensemble);
}

void CheckpointSink::save_now(const Ensemble& ensemble) {
    save(ensemble, *model_, schedule_, path_);
    last_ = std::chrono::steady_clock::now();
    ++saves_;
}

}  // namespace ptmc::persist
