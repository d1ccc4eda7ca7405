#pragma once
// Ising spin-glass models: E(s) = -sum_{(i,j)} J_ij s_i s_j - sum_i h_i s_i, s_i in {-1,+1}.
//
// Couplings and fields are single precision. Total energies are accumulated in
// double; local flip deltas stay single precision.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ptmc/kernels.hpp"
#include "ptmc/rng.hpp"

namespace ptmc {

using SiteIndex = std::uint32_t;

struct Coupling {
    SiteIndex first;
    SiteIndex second;
    float strength;
};

struct Neighbor {
    SiteIndex site;
    float strength;
};

class IsingModel {
public:
    /// Throws std::invalid_argument on self-couplings, out-of-range sites,
    /// duplicate unordered pairs, or a field vector of the wrong length.
    IsingModel(std::size_t num_sites, std::vector<float> fields, std::vector<Coupling> couplings);

    std::size_t num_sites() const { return fields_.size(); }
    std::size_t num_couplings() const { return strengths_.size(); }

    std::span<const float> fields() const { return fields_; }
    std::span<const SiteIndex> coupling_first() const { return first_; }
    std::span<const SiteIndex> coupling_second() const { return second_; }
    std::span<const float> coupling_strengths() const { return strengths_; }
    std::vector<Coupling> couplings() const;

    std::span<const Neighbor> neighbors(SiteIndex site) const {
        return {adjacency_.data() + offsets_[site], adjacency_.data() + offsets_[site + 1]};
    }

    /// FNV-1a over the canonical binary encoding (site count, fields, couplings).
    std::uint64_t fingerprint() const;

private:
    std::vector<float> fields_;
    std::vector<SiteIndex> first_;
    std::vector<SiteIndex> second_;
    std::vector<float> strengths_;
    std::vector<std::uint32_t> offsets_;
    std::vector<Neighbor> adjacency_;
};

/// Spin configuration. Storage carries a few bytes of zero padding past the
/// last site so the gather kernels can load 32 bits at any site offset.
class SpinState {
public:
    SpinState() = default;
    /// All spins up.
    explicit SpinState(std::size_t num_sites)
        : storage_(num_sites + kernels::kSpinGatherPadding, 0), size_(num_sites) {
        std::fill_n(storage_.begin(), num_sites, std::int8_t{1});
    }
    /// Throws std::invalid_argument if any value is not -1 or +1.
    explicit SpinState(std::span<const std::int8_t> spins);

    std::size_t size() const { return size_; }
    std::int8_t operator[](std::size_t i) const { return storage_[i]; }
    void flip(std::size_t i) { storage_[i] = static_cast<std::int8_t>(-storage_[i]); }

    const std::int8_t* data() const { return storage_.data(); }
    std::span<const std::int8_t> spins() const { return {storage_.data(), size_}; }

    /// Configuration with bit pattern `bits` (bit k set means site k is -1).
    static SpinState from_bits(std::size_t num_sites, std::uint64_t bits);
    /// Index of the configuration in the from_bits enumeration (num_sites <= 64).
    std::uint64_t to_bits() const;

    friend bool operator==(const SpinState& a, const SpinState& b) {
        return a.size_ == b.size_ && std::equal(a.storage_.begin(), a.storage_.begin() + a.size_, b.storage_.begin());
    }

private:
    std::vector<std::int8_t> storage_;
    std::size_t size_ = 0;
};

/// Full energy in double precision. Throws std::invalid_argument on size mismatch.
double energy(const IsingModel& model, const SpinState& state);

/// E(state with `site` flipped) - E(state), from the site's adjacency only.
/// Throws std::out_of_range for a bad site.
float delta_energy(const IsingModel& model, const SpinState& state, SiteIndex site);

inline float delta_energy_unchecked(const IsingModel& model, const SpinState& state, SiteIndex site) {
    float local = model.fields()[site];
    for (const Neighbor& n : model.neighbors(site)) local += n.strength * static_cast<float>(state[n.site]);
    return 2.0f * static_cast<float>(state[site]) * local;
}

// ---------------------------------------------------------------------------
// Region partition

enum class RegionGroup : std::uint8_t { A = 0, B = 1 };

struct RegionPartition {
    /// Each region's sites in ascending order.
    std::vector<std::vector<SiteIndex>> regions;
    std::vector<RegionGroup> group_of_region;

    std::size_t num_regions() const { return regions.size(); }
    /// Region indices of one group, ascending.
    std::vector<std::size_t> regions_in(RegionGroup group) const;
};

struct PartitionViolation {
    enum class Kind { ShapeMismatch, SiteOutOfRange, SiteInTwoRegions, SiteUncovered, SameGroupCoupling };
    Kind kind;
    std::string message;
    /// For SameGroupCoupling: the offending coupling and the regions of its ends.
    std::optional<Coupling> coupling;
    std::size_t first_region = 0;
    std::size_t second_region = 0;
};

/// Returns nullopt when the partition is valid for the model.
std::optional<PartitionViolation> verify_partition(const IsingModel& model, const RegionPartition& partition);

// ---------------------------------------------------------------------------
// Layered-ring generator

/// Couplings and fields of one slice, indexed by qubit.
struct SliceSpec {
    std::size_t qubits = 0;
    std::vector<Coupling> couplings;
    std::vector<float> fields;
};

enum class SliceTopology { Ring, Complete, Random };
enum class Disorder { PlusMinusOne, Gaussian };

struct RandomSliceOptions {
    SliceTopology topology = SliceTopology::Random;
    Disorder disorder = Disorder::PlusMinusOne;
    /// Target neighbours per qubit for SliceTopology::Random.
    std::size_t degree = 6;
    float field_scale = 1.0f;
};

/// Random spin-glass slice; draws only from `rng`.
SliceSpec random_slice(std::size_t qubits, const RandomSliceOptions& options, RngStream& rng);

struct LayeredProblem {
    IsingModel model;
    RegionPartition partition;
    std::size_t qubits;
    std::size_t copies;
};

/// `copies` replicas of `slice` on a ring; site = slice_index * qubits + qubit.
/// Each qubit couples to its image in both neighbouring slices with
/// `inter_slice_strength` (with copies == 2 both ring bonds join the same
/// pair and are merged into one coupling of twice the strength).
/// Region k is slice k; even slices form group A, odd slices group B.
/// Throws std::invalid_argument for odd or < 2 copies, or an empty slice.
LayeredProblem generate_layered(const SliceSpec& slice, std::size_t copies, float inter_slice_strength = 1.0f);

// ---------------------------------------------------------------------------
// Problem files:
//   sites N
//   field i h
//   coupling i j J
//   region r A|B site...      (optional; defines a region partition)
// '#' starts a comment.

struct ProblemFile {
    IsingModel model;
    std::optional<RegionPartition> partition;
};

void write_problem(std::ostream& out, const IsingModel& model, const RegionPartition* partition = nullptr);
/// Throws FormatError with a line number on malformed input.
ProblemFile read_problem(std::istream& in);

}  // namespace ptmc
