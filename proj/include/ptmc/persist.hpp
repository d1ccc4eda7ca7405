#pragma once
// Checkpoints: the complete ensemble plus schedule, written atomically at
// swap-phase boundaries. Layout is documented in docs/checkpoint-format.md.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ptmc/ising.hpp"
#include "ptmc/tempering.hpp"

namespace ptmc::persist {

inline constexpr std::uint32_t kFormatVersion = 1;

struct Schedule {
    std::uint64_t total_sweeps = 0;
};

struct Checkpoint {
    std::uint64_t model_fingerprint = 0;
    Schedule schedule;
    Ensemble ensemble;
};

class CheckpointError : public FormatError {
public:
    using FormatError::FormatError;
};

std::vector<std::byte> encode(const Ensemble& ensemble, const IsingModel& model, const Schedule& schedule);

/// Verifies magic, version, checksum and the model fingerprint before
/// decoding anything; throws CheckpointError on any mismatch.
Checkpoint decode(std::span<const std::byte> bytes, const IsingModel& model);

/// Writes to `path`.tmp and renames over `path`; an existing checkpoint is
/// left untouched if anything fails. Throws std::runtime_error on I/O errors.
void save(const Ensemble& ensemble, const IsingModel& model, const Schedule& schedule,
          const std::filesystem::path& path);

Checkpoint load(const std::filesystem::path& path, const IsingModel& model);

/// Phase hook that saves whenever `interval` has elapsed since the last save.
class CheckpointSink {
public:
    CheckpointSink(std::filesystem::path path, std::chrono::duration<double> interval, const IsingModel& model,
                   Schedule schedule);

    void operator()(const Ensemble& ensemble, const PhaseRecord& record);

    /// Unconditional save, e.g. at the end of a run.
    void save_now(const Ensemble& ensemble);

    std::uint64_t saves() const { return saves_; }

private:
    std::filesystem::path path_;
    std::chrono::duration<double> interval_;
    const IsingModel* model_;
    Schedule schedule_;
    std::chrono::steady_clock::time_point last_;
    std::uint64_t saves_ = 0;
};

}  // namespace ptmc::persist
