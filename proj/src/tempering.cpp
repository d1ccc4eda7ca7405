#include "ptmc/tempering.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>

namespace ptmc {

std::vector<double> Ensemble::temperatures() const {
    std::vector<double> t;
    t.reserve(chains.size());
    for (const Chain& c : chains) t.push_back(c.temperature());
    return t;
}

// ---------------------------------------------------------------------------
// Ladders

void validate_ladder(std::span<const double> temperatures) {
    if (temperatures.empty()) throw std::invalid_argument("temperature ladder is empty");
    for (std::size_t k = 0; k < temperatures.size(); ++k) {
        if (!(temperatures[k] > 0.0) || !std::isfinite(temperatures[k])) {
            throw std::invalid_argument("temperature " + std::to_string(k) + " is not positive and finite");
        }
        if (k > 0 && !(temperatures[k] < temperatures[k - 1])) {
            throw std::invalid_argument("temperatures must strictly decrease (entry " + std::to_string(k) + ")");
        }
    }
}

std::vector<double> geometric_ladder(double t_min, double t_max, std::size_t n) {
    if (n == 0) throw std::invalid_argument("ladder needs at least one chain");
    if (!(t_min > 0.0) || !(t_max > 0.0)) throw std::invalid_argument("ladder temperatures must be positive");
    if (n > 1 && !(t_max > t_min)) throw std::invalid_argument("ladder needs t_max > t_min");
    std::vector<double> t(n);
    t[0] = t_max;
    for (std::size_t k = 1; k < n; ++k) {
        const double frac = static_cast<double>(k) / static_cast<double>(n - 1);
        t[k] = t_max * std::pow(t_min / t_max, frac);
    }
    if (n > 1) t[n - 1] = t_min;
    return t;
}

std::vector<double> read_ladder(std::istream& in) {
    std::vector<double> t;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream tokens(line);
        double value = 0.0;
        if (!(tokens >> value)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            throw FormatError("ladder line " + std::to_string(line_no) + ": not a number");
        }
        std::string extra;
        if (tokens >> extra) throw FormatError("ladder line " + std::to_string(line_no) + ": trailing text");
        t.push_back(value);
    }
    try {
        validate_ladder(t);
    } catch (const std::invalid_argument& e) {
        throw FormatError(e.what());
    }
    return t;
}

void write_ladder(std::ostream& out, std::span<const double> temperatures) {
    const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
    for (const double t : temperatures) out << t << '\n';
    out.precision(old_precision);
}

// ---------------------------------------------------------------------------
// Construction

namespace {

void randomize(SpinState& state, RngStream& rng, std::span<const SiteIndex> sites) {
    for (const SiteIndex s : sites) {
        if ((rng.next_u32() >> 31) != 0) state.flip(s);
    }
}

void require_partition(const IsingModel& model, const RegionPartition* partition) {
    if (partition == nullptr) throw std::invalid_argument("regional mode needs a region partition");
    if (const auto violation = verify_partition(model, *partition)) {
        throw std::invalid_argument("invalid region partition: " + violation->message);
    }
}

}  // namespace

Ensemble make_ensemble(const IsingModel& model, const RegionPartition* partition, const EnsembleSpec& spec) {
    validate_ladder(spec.temperatures);
    if (spec.sweeps_per_swap == 0) throw std::invalid_argument("sweeps_per_swap must be positive");
    const std::size_t n = spec.temperatures.size();
    Ensemble e;
    e.mode = spec.mode;
    e.sweeps_per_swap = spec.sweeps_per_swap;
    e.swap_stats.assign(n > 0 ? n - 1 : 0, SwapStats{});
    e.chains.resize(n);

    std::vector<SiteIndex> all_sites(model.num_sites());
    for (std::size_t i = 0; i < all_sites.size(); ++i) all_sites[i] = static_cast<SiteIndex>(i);

    if (spec.mode == SweepMode::Regional) {
        require_partition(model, partition);
        const std::size_t regions = partition->num_regions();
        for (std::size_t c = 0; c < n; ++c) {
            Chain& chain = e.chains[c];
            chain.beta = 1.0 / spec.temperatures[c];
            chain.state = SpinState(model.num_sites());
            for (std::size_t r = 0; r < regions; ++r) {
                chain.streams.emplace_back(regional_seed(spec.seed, c, regions, r));
                randomize(chain.state, chain.streams.back(), partition->regions[r]);
            }
            chain.energy = energy(model, chain.state);
        }
        e.swap_rng = RngStream(regional_seed(spec.seed, n, regions, 0));
    } else {
        for (std::size_t c = 0; c < n; ++c) {
            Chain& chain = e.chains[c];
            chain.beta = 1.0 / spec.temperatures[c];
            chain.state = SpinState(model.num_sites());
            chain.streams.emplace_back(coarse_seed(spec.seed, c));
            randomize(chain.state, chain.streams.back(), all_sites);
            chain.energy = energy(model, chain.state);
        }
        e.swap_rng = RngStream(coarse_seed(spec.seed, n));
    }
    return e;
}

// ---------------------------------------------------------------------------
// Sweeps

namespace {

// Memo of exp(-beta * dE) for one pass at fixed beta. Couplings usually take
// few distinct values, so most positive deltas repeat. Values are identical
// to calling exp directly.
class AcceptanceMemo {
public:
    explicit AcceptanceMemo(double beta) : beta_(beta) { keys_.fill(kEmpty); }

    double operator()(float delta) {
        const std::uint32_t bits = std::bit_cast<std::uint32_t>(delta);
        const std::size_t slot = (bits ^ (bits >> 13) ^ (bits >> 23)) & (kSlots - 1);
        if (keys_[slot] != bits) {
            keys_[slot] = bits;
            values_[slot] = std::exp(-beta_ * static_cast<double>(delta));
        }
        return values_[slot];
    }

private:
    static constexpr std::size_t kSlots = 32;
    // Bit pattern of a NaN never produced for a positive delta.
    static constexpr std::uint32_t kEmpty = 0xffffffffu;
    double beta_;
    std::array<std::uint32_t, kSlots> keys_{};
    std::array<double, kSlots> values_{};
};

template <typename SiteAt>
PassResult metropolis_pass_impl(const IsingModel& model, SpinState& state, double beta, std::size_t count,
                                SiteAt site_at, const float* uniforms) {
    AcceptanceMemo memo(beta);
    PassResult result;
    for (std::size_t k = 0; k < count; ++k) {
        const SiteIndex s = site_at(k);
        const float delta = delta_energy_unchecked(model, state, s);
        if (delta <= 0.0f || static_cast<double>(uniforms[k]) < memo(delta)) {
            state.flip(s);
            result.delta_energy += static_cast<double>(delta);
            ++result.accepted;
        }
    }
    return result;
}

void apply(Chain& chain, const PassResult& r, std::size_t attempted) {
    chain.energy += r.delta_energy;
    chain.stats.accepted_flips += r.accepted;
    chain.stats.attempted_flips += attempted;
}

PassResult sweep_region(Chain& chain, const IsingModel& model, const RegionPartition& partition, std::size_t region,
                        std::vector<float>& scratch) {
    const auto& sites = partition.regions[region];
    scratch.resize(sites.size());
    chain.streams[region].fill_unit(scratch);
    return metropolis_pass(model, chain.state, chain.beta, sites, scratch);
}

void require_streams(const Chain& chain, const RegionPartition& partition) {
    if (chain.streams.size() != partition.num_regions()) {
        throw std::invalid_argument("chain has " + std::to_string(chain.streams.size()) + " streams for " +
                                    std::to_string(partition.num_regions()) + " regions");
    }
}

std::vector<float>& worker_scratch() {
    thread_local std::vector<float> scratch;
    return scratch;
}

// Region sweeps for a set of chains: all group-A (chain, region) tasks, a
// barrier, then all group-B tasks. Per-region results are folded into each
// chain afterwards in region order, so the cached energy does not depend on
// the schedule.
void sweep_regions_of(std::span<Chain* const> chains, const IsingModel& model, const RegionPartition& partition,
                      WorkerPool& workers) {
    const std::size_t regions = partition.num_regions();
    std::vector<PassResult> results(chains.size() * regions);
    for (const RegionGroup group : {RegionGroup::A, RegionGroup::B}) {
        const auto members = partition.regions_in(group);
        std::vector<std::size_t> order(chains.size() * members.size());
        for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
        WorkPool tasks(std::move(order));
        run_phase(workers, tasks, [&](std::size_t task) {
            const std::size_t c = task / members.size();
            const std::size_t r = members[task % members.size()];
            results[c * regions + r] = sweep_region(*chains[c], model, partition, r, worker_scratch());
        });
    }
    for (std::size_t c = 0; c < chains.size(); ++c) {
        for (const RegionGroup group : {RegionGroup::A, RegionGroup::B}) {
            for (const std::size_t r : partition.regions_in(group)) {
                apply(*chains[c], results[c * regions + r], partition.regions[r].size());
            }
        }
        ++chains[c]->stats.sweeps;
    }
}

}  // namespace

PassResult metropolis_pass(const IsingModel& model, SpinState& state, double beta, std::span<const SiteIndex> sites,
                           std::span<const float> uniforms) {
    if (uniforms.size() < sites.size()) throw std::invalid_argument("metropolis_pass: too few uniforms");
    return metropolis_pass_impl(
        model, state, beta, sites.size(), [&](std::size_t k) { return sites[k]; }, uniforms.data());
}

void sweep(Chain& chain, const IsingModel& model) {
    const std::size_t n = model.num_sites();
    chain.scratch.resize(n);
    chain.streams.front().fill_unit(chain.scratch);
    const PassResult r = metropolis_pass_impl(
        model, chain.state, chain.beta, n, [](std::size_t k) { return static_cast<SiteIndex>(k); },
        chain.scratch.data());
    apply(chain, r, n);
    ++chain.stats.sweeps;
}

void sweep_regional(Chain& chain, const IsingModel& model, const RegionPartition& partition, WorkerPool& workers) {
    if (const auto violation = verify_partition(model, partition)) {
        throw std::invalid_argument("invalid region partition: " + violation->message);
    }
    require_streams(chain, partition);
    Chain* const one[] = {&chain};
    sweep_regions_of(one, model, partition, workers);
}

// ---------------------------------------------------------------------------
// Swaps

double swap_acceptance(double beta_lower, double beta_upper, double e_lower, double e_upper) {
    return std::min(1.0, std::exp((beta_lower - beta_upper) * (e_lower - e_upper)));
}

bool attempt_swap(Chain& lower, Chain& upper, RngStream& swap_rng) {
    const double u = static_cast<double>(swap_rng.next_unit_f32());
    const double exponent = (lower.beta - upper.beta) * (lower.energy - upper.energy);
    if (exponent >= 0.0 || u < std::exp(exponent)) {
        std::swap(lower.state, upper.state);
        std::swap(lower.energy, upper.energy);
        return true;
    }
    return false;
}

void swap_phase(Ensemble& ensemble) {
    auto& chains = ensemble.chains;
    for (std::size_t k = ensemble.swap_parity; k + 1 < chains.size(); k += 2) {
        ++ensemble.swap_stats[k].attempted;
        if (attempt_swap(chains[k], chains[k + 1], ensemble.swap_rng)) ++ensemble.swap_stats[k].accepted;
    }
    ensemble.swap_parity ^= 1u;
    ++ensemble.swap_counter;
}

// ---------------------------------------------------------------------------
// Driver

RunReport run(Ensemble& ensemble, const IsingModel& model, const RegionPartition* partition, WorkerPool& workers,
              const RunOptions& options, const RunHooks& hooks) {
    using Clock = std::chrono::steady_clock;
    const auto run_start = Clock::now();
    throttle(options.throttle, std::chrono::nanoseconds{0});  // validates the duty cycle

    for (const Chain& c : ensemble.chains) {
        if (c.state.size() != model.num_sites()) throw std::invalid_argument("ensemble does not match the model");
    }
    if (ensemble.mode == SweepMode::Regional) {
        require_partition(model, partition);
        for (const Chain& c : ensemble.chains) require_streams(c, *partition);
    }

    RunReport report;
    const std::uint64_t per_phase = ensemble.sweeps_per_swap;
    report.requested_sweeps = options.total_sweeps;
    report.scheduled_sweeps = (options.total_sweeps + per_phase - 1) / per_phase * per_phase;
    report.rounded_up = report.scheduled_sweeps != options.total_sweeps;

    WorkPool pool = build_work_pool(ensemble.temperatures());
    std::vector<Chain*> hottest_first;
    for (const std::size_t c : pool.order()) hottest_first.push_back(&ensemble.chains[c]);

    const std::size_t n = ensemble.chains.size();
    std::vector<std::uint64_t> prev_attempted(n);
    std::vector<std::uint64_t> prev_accepted(n);
    std::chrono::nanoseconds pt_time{0};
    std::chrono::nanoseconds idle_time{0};

    while (ensemble.sweep_counter < report.scheduled_sweeps) {
        for (std::size_t c = 0; c < n; ++c) {
            prev_attempted[c] = ensemble.chains[c].stats.attempted_flips;
            prev_accepted[c] = ensemble.chains[c].stats.accepted_flips;
        }
        const auto active_start = Clock::now();

        if (ensemble.mode == SweepMode::Coarse) {
            run_phase(workers, pool, [&](std::size_t c) {
                Chain& chain = ensemble.chains[c];
                for (std::uint64_t s = 0; s < per_phase; ++s) sweep(chain, model);
                chain.energy = energy(model, chain.state);
            });
        } else {
            for (std::uint64_t s = 0; s < per_phase; ++s) sweep_regions_of(hottest_first, model, *partition, workers);
            run_phase(workers, pool, [&](std::size_t c) {
                ensemble.chains[c].energy = energy(model, ensemble.chains[c].state);
            });
        }
        ensemble.sweep_counter += per_phase;

        swap_phase(ensemble);
        for (Chain& c : ensemble.chains) c.stats.record_energy(c.energy);
        const auto active = Clock::now() - active_start;
        pt_time += active;
        ++report.phases;

        if (hooks.on_phase) {
            PhaseRecord record;
            record.phase = ensemble.swap_counter;
            record.sweep_counter = ensemble.sweep_counter;
            for (std::size_t c = 0; c < n; ++c) {
                const auto& st = ensemble.chains[c].stats;
                record.energies.push_back(ensemble.chains[c].energy);
                const auto attempted = st.attempted_flips - prev_attempted[c];
                record.flip_rates.push_back(attempted == 0 ? 0.0
                                                           : static_cast<double>(st.accepted_flips - prev_accepted[c]) /
                                                                 static_cast<double>(attempted));
            }
            for (const SwapStats& s : ensemble.swap_stats) record.swap_rates.push_back(s.rate());
            hooks.on_phase(ensemble, record);
        }

        const auto idle = throttle(options.throttle, std::chrono::duration_cast<std::chrono::nanoseconds>(active));
        if (idle.count() > 0) {
            const auto idle_start = Clock::now();
            std::this_thread::sleep_for(idle);
            idle_time += Clock::now() - idle_start;
        }
    }

    report.pt_seconds = std::chrono::duration<double>(pt_time).count();
    report.idle_seconds = std::chrono::duration<double>(idle_time).count();
    report.total_seconds = std::chrono::duration<double>(Clock::now() - run_start).count();
    return report;
}

// ---------------------------------------------------------------------------
// Encoding

void encode_ensemble(const Ensemble& e, ByteWriter& out) {
    const std::size_t sites = e.chains.empty() ? 0 : e.chains.front().state.size();
    out.put<std::uint32_t>(static_cast<std::uint32_t>(e.chains.size()));
    out.put<std::uint32_t>(static_cast<std::uint32_t>(sites));
    out.put<std::uint8_t>(static_cast<std::uint8_t>(e.mode));
    out.put<std::uint32_t>(e.sweeps_per_swap);
    out.put<std::uint64_t>(e.sweep_counter);
    out.put<std::uint64_t>(e.swap_counter);
    out.put<std::uint8_t>(e.swap_parity);
    e.swap_rng.encode(out);
    for (const Chain& c : e.chains) {
        out.put<double>(c.beta);
        out.put<double>(c.energy);
        out.put_all(c.state.spins());
        out.put<std::uint32_t>(static_cast<std::uint32_t>(c.streams.size()));
        for (const RngStream& s : c.streams) s.encode(out);
        out.put<std::uint64_t>(c.stats.sweeps);
        out.put<std::uint64_t>(c.stats.attempted_flips);
        out.put<std::uint64_t>(c.stats.accepted_flips);
        out.put<std::uint64_t>(c.stats.energy_samples);
        out.put<double>(c.stats.energy_mean);
        out.put<double>(c.stats.energy_m2);
    }
    for (const SwapStats& s : e.swap_stats) {
        out.put<std::uint64_t>(s.attempted);
        out.put<std::uint64_t>(s.accepted);
    }
}

std::vector<std::byte> encode_ensemble(const Ensemble& ensemble) {
    ByteWriter w;
    encode_ensemble(ensemble, w);
    return std::move(w).take();
}

Ensemble decode_ensemble(ByteReader& in) {
    Ensemble e;
    const auto num_chains = in.get<std::uint32_t>();
    const auto sites = in.get<std::uint32_t>();
    const auto mode = in.get<std::uint8_t>();
    if (mode > 1) throw FormatError("unknown sweep mode " + std::to_string(mode));
    e.mode = static_cast<SweepMode>(mode);
    e.sweeps_per_swap = in.get<std::uint32_t>();
    if (e.sweeps_per_swap == 0) throw FormatError("sweeps_per_swap is zero");
    e.sweep_counter = in.get<std::uint64_t>();
    e.swap_counter = in.get<std::uint64_t>();
    e.swap_parity = in.get<std::uint8_t>();
    if (e.swap_parity > 1) throw FormatError("swap parity out of range");
    e.swap_rng = RngStream::decode(in);
    // Each chain needs at least its fixed-size fields; reject absurd counts early.
    if (static_cast<std::uint64_t>(num_chains) * (sites + 64) > in.remaining()) {
        throw FormatError("truncated data: ensemble declares " + std::to_string(num_chains) + " chains");
    }
    e.chains.resize(num_chains);
    std::vector<std::int8_t> spins(sites);
    for (Chain& c : e.chains) {
        c.beta = in.get<double>();
        c.energy = in.get<double>();
        in.get_all(std::span<std::int8_t>{spins});
        try {
            c.state = SpinState(spins);
        } catch (const std::invalid_argument& err) {
            throw FormatError(err.what());
        }
        const auto streams = in.get<std::uint32_t>();
        if (static_cast<std::uint64_t>(streams) * RngStream::kEncodedBytes > in.remaining()) {
            throw FormatError("truncated data: chain declares " + std::to_string(streams) + " streams");
        }
        for (std::uint32_t s = 0; s < streams; ++s) c.streams.push_back(RngStream::decode(in));
        c.stats.sweeps = in.get<std::uint64_t>();
        c.stats.attempted_flips = in.get<std::uint64_t>();
        c.stats.accepted_flips = in.get<std::uint64_t>();
        c.stats.energy_samples = in.get<std::uint64_t>();
        c.stats.energy_mean = in.get<double>();
        c.stats.energy_m2 = in.get<double>();
    }
    e.swap_stats.resize(num_chains > 0 ? num_chains - 1 : 0);
    for (SwapStats& s : e.swap_stats) {
        s.attempted = in.get<std::uint64_t>();
        s.accepted = in.get<std::uint64_t>();
    }
    return e;
}

}  // namespace ptmc
