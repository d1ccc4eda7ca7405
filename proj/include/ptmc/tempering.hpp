#pragma once
// Parallel tempering: Metropolis sweeps per chain, probabilistic exchange of
// configurations between adjacent temperatures, and the sweep/swap driver.
//
// Chains are temperature slots. A swap exchanges configurations and cached
// energies only; the temperature, RNG streams and statistics stay with the
// slot. Every slot therefore consumes its streams on a fixed schedule and the
// whole trajectory is independent of how chains are spread over workers.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "ptmc/bytes.hpp"
#include "ptmc/ising.hpp"
#include "ptmc/parallel.hpp"
#include "ptmc/rng.hpp"

namespace ptmc {

enum class SweepMode : std::uint8_t {
    /// One stream per chain; chains spread over workers.
    Coarse = 0,
    /// One stream per region; regions of one group spread over workers.
    Regional = 1,
};

struct ChainStats {
    std::uint64_t sweeps = 0;
    std::uint64_t attempted_flips = 0;
    std::uint64_t accepted_flips = 0;
    // Welford accumulators over per-swap-phase energy samples.
    std::uint64_t energy_samples = 0;
    double energy_mean = 0.0;
    double energy_m2 = 0.0;

    void record_energy(double e) {
        ++energy_samples;
        const double d = e - energy_mean;
        energy_mean += d / static_cast<double>(energy_samples);
        energy_m2 += d * (e - energy_mean);
    }
    double energy_variance() const {
        return energy_samples > 1 ? energy_m2 / static_cast<double>(energy_samples - 1) : 0.0;
    }
    double flip_rate() const {
        return attempted_flips == 0 ? 0.0
                                    : static_cast<double>(accepted_flips) / static_cast<double>(attempted_flips);
    }
};

struct Chain {
    SpinState state;
    double beta = 1.0;
    /// Cached energy of `state`; exact after every sweep batch.
    double energy = 0.0;
    /// Coarse mode: one stream. Regional mode: one stream per region.
    std::vector<RngStream> streams;
    ChainStats stats;

    double temperature() const { return 1.0 / beta; }

    /// Per-sweep scratch for pre-drawn uniforms; not part of the chain state.
    std::vector<float> scratch;
};

struct SwapStats {
    std::uint64_t attempted = 0;
    std::uint64_t accepted = 0;
    double rate() const {
        return attempted == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(attempted);
    }
};

struct Ensemble {
    /// Index 0 is the hottest chain; temperatures strictly decrease.
    std::vector<Chain> chains;
    RngStream swap_rng;
    std::uint8_t swap_parity = 0;
    SweepMode mode = SweepMode::Coarse;
    std::uint32_t sweeps_per_swap = 1;
    std::uint64_t sweep_counter = 0;
    std::uint64_t swap_counter = 0;
    /// swap_stats[k] covers the pair (k, k + 1).
    std::vector<SwapStats> swap_stats;

    std::vector<double> temperatures() const;
};

struct EnsembleSpec {
    /// Strictly decreasing, positive.
    std::vector<double> temperatures;
    std::uint32_t seed = 1;
    SweepMode mode = SweepMode::Coarse;
    std::uint32_t sweeps_per_swap = 1;
};

/// Seeds every stream from spec.seed (coarse: seed + chain, regional:
/// seed + chain * regions + region; the swap stream takes the next unused
/// seed) and draws each chain's random initial configuration from its own
/// streams, one word per site. Regional mode requires a valid partition.
Ensemble make_ensemble(const IsingModel& model, const RegionPartition* partition, const EnsembleSpec& spec);

/// T_max down to T_min, geometrically spaced. n == 1 gives {t_max}.
std::vector<double> geometric_ladder(double t_min, double t_max, std::size_t n);
/// One temperature per line, strictly decreasing; '#' comments allowed.
std::vector<double> read_ladder(std::istream& in);
void write_ladder(std::ostream& out, std::span<const double> temperatures);
/// Throws std::invalid_argument unless strictly decreasing and positive.
void validate_ladder(std::span<const double> temperatures);

// ---------------------------------------------------------------------------
// Sweeps

struct PassResult {
    double delta_energy = 0.0;
    std::uint64_t accepted = 0;
};

/// Metropolis pass over `sites` in the given order, one pre-drawn uniform per
/// site. A flip is taken when dE <= 0 or u < exp(-beta * dE), with the
/// exponential evaluated in double.
PassResult metropolis_pass(const IsingModel& model, SpinState& state, double beta,
                           std::span<const SiteIndex> sites, std::span<const float> uniforms);

/// One sweep of every site in ascending order, one draw per site from the
/// chain's stream. Updates the cached energy incrementally.
void sweep(Chain& chain, const IsingModel& model);

/// Group-A regions concurrently, barrier, then group-B regions. Each region
/// is swept in ascending site order with that region's own stream, so the
/// result equals sweeping group-A regions then group-B regions serially in
/// region order, for any worker count.
/// Throws std::invalid_argument for an invalid partition or missing streams.
void sweep_regional(Chain& chain, const IsingModel& model, const RegionPartition& partition, WorkerPool& workers);

// ---------------------------------------------------------------------------
// Swaps

/// min(1, exp((beta_lower - beta_upper) * (e_lower - e_upper))).
double swap_acceptance(double beta_lower, double beta_upper, double e_lower, double e_upper);

/// Draws one uniform from swap_rng; on acceptance exchanges configurations
/// and cached energies.
bool attempt_swap(Chain& lower, Chain& upper, RngStream& swap_rng);

/// Disjoint adjacent pairs (p, p+1), (p+2, p+3), ... with p = swap_parity,
/// attempted in ascending order; then flips the parity.
void swap_phase(Ensemble& ensemble);

// ---------------------------------------------------------------------------
// Driver

struct PhaseRecord {
    std::uint64_t phase = 0;
    std::uint64_t sweep_counter = 0;
    std::vector<double> energies;
    /// Flip acceptance during the sweep batch just finished.
    std::vector<double> flip_rates;
    /// Cumulative acceptance per adjacent pair.
    std::vector<double> swap_rates;
};

struct RunHooks {
    /// Called after every swap phase, outside the timed region. Exceptions propagate.
    std::function<void(const Ensemble&, const PhaseRecord&)> on_phase;
};

struct RunOptions {
    /// Sweeps every chain must have received when run() returns; rounded up
    /// to a multiple of sweeps_per_swap.
    std::uint64_t total_sweeps = 0;
    ThrottleConfig throttle;
};

struct RunReport {
    std::uint64_t requested_sweeps = 0;
    std::uint64_t scheduled_sweeps = 0;
    bool rounded_up = false;
    std::uint64_t phases = 0;
    /// Sweeping, swapping and measurement, excluding hooks and throttle idling.
    double pt_seconds = 0.0;
    /// Wall clock of the whole call.
    double total_seconds = 0.0;
    double idle_seconds = 0.0;
};

/// Repeats [sweeps_per_swap sweeps of every chain, swap phase, measurement]
/// until the ensemble's sweep counter reaches the (rounded) target. Continues
/// from the ensemble's current counters, so a restored checkpoint resumes.
RunReport run(Ensemble& ensemble, const IsingModel& model, const RegionPartition* partition, WorkerPool& workers,
              const RunOptions& options, const RunHooks& hooks = {});

// ---------------------------------------------------------------------------
// Binary state encoding (little-endian, fixed width)

void encode_ensemble(const Ensemble& ensemble, ByteWriter& out);
std::vector<std::byte> encode_ensemble(const Ensemble& ensemble);
/// Throws FormatError on truncated or inconsistent data.
Ensemble decode_ensemble(ByteReader& in);

}  // namespace ptmc
