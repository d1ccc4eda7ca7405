#pragma once
// Experiment harness behind the command-line tool: problem generation, timed
// runs with repetitions, thread-scaling and problem-size sweeps, packing
// plans, and CSV reports.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ptmc/csv.hpp"
#include "ptmc/ising.hpp"
#include "ptmc/parallel.hpp"
#include "ptmc/tempering.hpp"

namespace ptmc::cli {

struct GeneratorParams {
    std::size_t qubits = 8;
    std::size_t copies = 128;
    RandomSliceOptions slice;
    float inter_slice_strength = 1.0f;
};

struct Problem {
    IsingModel model;
    std::optional<RegionPartition> partition;
};

/// Deterministic in (params, seed): the slice is drawn from a stream seeded with `seed`.
Problem generate_problem(const GeneratorParams& params, std::uint32_t seed);
Problem load_problem(const std::filesystem::path& path);

struct RunConfig {
    std::optional<std::filesystem::path> problem_file;
    GeneratorParams generator;
    std::size_t chains = 16;
    double t_min = 0.5;
    double t_max = 5.0;
    std::optional<std::filesystem::path> ladder_file;
    std::uint64_t total_sweeps = 2000;
    std::uint32_t sweeps_per_swap = 10;
    std::uint32_t seed = 1;
    std::size_t workers = 1;
    SweepMode mode = SweepMode::Coarse;
    ThrottleConfig throttle;
    std::size_t repetitions = 1;
    /// Report files are <prefix>.phases.csv, .runs.csv, .chains.csv, .pairs.csv.
    std::optional<std::filesystem::path> out_prefix;
    std::optional<std::filesystem::path> checkpoint;
    double checkpoint_interval_seconds = 60.0;
};

/// Throws std::invalid_argument for unusable settings.
void validate(const RunConfig& config);

std::vector<double> ladder_for(const RunConfig& config);

struct MeanStd {
    double mean = 0.0;
    /// Sample standard deviation; 0 for a single value.
    double stddev = 0.0;
};
MeanStd mean_std(const std::vector<double>& values);

struct Repetition {
    RunReport report;
    /// Wall clock of the repetition including setup and checkpoint I/O.
    double total_seconds = 0.0;
    std::uint64_t state_hash = 0;
    std::vector<PhaseRecord> phases;
};

struct RunSummary {
    std::size_t num_sites = 0;
    std::vector<Repetition> repetitions;
    MeanStd pt_seconds;
    MeanStd total_seconds;
    /// Final ensemble of the last repetition.
    Ensemble final_ensemble;
};

/// Executes config.repetitions independent runs from identical seeds and, if
/// out_prefix is set, writes the four report files once everything succeeded.
RunSummary cmd_run(const RunConfig& config);

/// Continues a checkpointed run to the total stored in the checkpoint.
RunSummary cmd_resume(const RunConfig& config, const std::filesystem::path& checkpoint);

csv::Table phases_table(const RunSummary& summary);
csv::Table runs_table(const RunSummary& summary);
csv::Table chains_table(const RunSummary& summary);
csv::Table pairs_table(const RunSummary& summary);

// ---------------------------------------------------------------------------

struct GenerateConfig {
    GeneratorParams generator;
    std::size_t chains = 16;
    double t_min = 0.5;
    double t_max = 5.0;
    std::uint32_t seed = 1;
    std::optional<std::filesystem::path> problem_out;
    std::optional<std::filesystem::path> ladder_out;
};

struct GenerateResult {
    std::size_t qubits;
    std::size_t copies;
    std::size_t chains;
    std::size_t sites_per_chain;
    std::size_t total_variables;
    /// "qubits 8  chains 27  total variables 27,648"
    std::string size_line;
};

/// qubits * copies * chains.
std::size_t total_variables(std::size_t qubits, std::size_t copies, std::size_t chains);
std::string with_thousands(std::uint64_t value);

GenerateResult cmd_generate(const GenerateConfig& config);

// ---------------------------------------------------------------------------

struct SpeedupRow {
    std::size_t workers;
    double seconds;
    double speedup;
    double linear;
};

/// speedup = seconds(1 worker) / seconds(w). Throws std::invalid_argument
/// unless the input contains exactly one entry for 1 worker.
std::vector<SpeedupRow> speedup_rows(const std::vector<std::pair<std::size_t, double>>& timings);

struct ScalingRow {
    std::size_t workers;
    MeanStd pt_seconds;
    MeanStd total_seconds;
    double speedup;
    double linear;
    std::uint64_t state_hash;
};

std::vector<ScalingRow> cmd_scaling(const RunConfig& config, const std::vector<std::size_t>& worker_counts);
csv::Table scaling_table(const std::vector<ScalingRow>& rows);

// ---------------------------------------------------------------------------

struct ThroughputProblem {
    std::size_t qubits;
    std::size_t copies;
    std::size_t chains;
};

/// Parses "qubits:copies:chains".
ThroughputProblem parse_throughput_problem(const std::string& text);

struct ThroughputRow {
    ThroughputProblem problem;
    std::uint64_t variables;
    double pt_seconds;
    double total_seconds;
    double variables_per_second;
};

/// variables / pt_seconds.
double throughput(std::uint64_t variables, double pt_seconds);

std::vector<ThroughputRow> cmd_throughput(const RunConfig& config, const std::vector<ThroughputProblem>& problems);
csv::Table throughput_table(const std::vector<ThroughputRow>& rows);

// ---------------------------------------------------------------------------

struct PackPlanConfig {
    std::size_t chains = 111;
    std::size_t processors = 30;
    std::size_t block_size = 32;
    std::size_t max_threads_per_block = 512;
    std::vector<std::size_t> register_budgets = {8192, 16384};
    std::size_t registers_per_chain = 0;
};

csv::Table cmd_pack_plan(const PackPlanConfig& config);

}  // namespace ptmc::cli
