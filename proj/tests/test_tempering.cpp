#include <doctest.h>

#include <bit>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "ptmc/tempering.hpp"

using namespace ptmc;

namespace {

IsingModel random_model(std::size_t n, double density, std::uint32_t seed) {
    std::mt19937 g(seed);
    std::uniform_real_distribution<float> w(-1.0f, 1.0f);
    std::bernoulli_distribution keep(density);
    std::vector<float> h;
    std::vector<Coupling> j;
    for (std::size_t i = 0; i < n; ++i) h.push_back(0.3f * w(g));
    for (SiteIndex a = 0; a < n; ++a)
        for (SiteIndex b = a + 1; b < n; ++b)
            if (keep(g)) j.push_back({a, b, w(g)});
    return IsingModel(n, std::move(h), std::move(j));
}

// exp(-beta E) / Z over every state, with E evaluated term by term.
std::vector<double> boltzmann(const IsingModel& m, double beta) {
    const std::size_t n = m.num_sites();
    std::vector<double> p(std::size_t{1} << n);
    double z = 0.0;
    for (std::uint64_t bits = 0; bits < p.size(); ++bits) {
        auto s = [&](std::size_t i) { return (bits >> i) & 1u ? -1.0 : 1.0; };
        double e = 0.0;
        for (const auto& c : m.couplings()) e -= c.strength * s(c.first) * s(c.second);
        for (std::size_t i = 0; i < n; ++i) e -= m.fields()[i] * s(i);
        p[bits] = std::exp(-beta * e);
        z += p[bits];
    }
    for (auto& x : p) x /= z;
    return p;
}

double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
    double tv = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) tv += std::abs(a[i] - b[i]);
    return tv / 2.0;
}

Chain single_chain(const IsingModel& m, double temperature, std::uint32_t seed) {
    auto e = make_ensemble(m, nullptr, {{temperature}, seed, SweepMode::Coarse, 1});
    return std::move(e.chains.front());
}

LayeredProblem layered(std::size_t qubits, std::size_t copies, std::uint32_t seed) {
    RngStream rng(seed);
    return generate_layered(random_slice(qubits, {}, rng), copies, 0.8f);
}

// Region-ordered serial execution built on the pass primitive alone.
void reference_regional_sweep(Chain& chain, const IsingModel& m, const RegionPartition& p) {
    for (const RegionGroup g : {RegionGroup::A, RegionGroup::B}) {
        for (const std::size_t r : p.regions_in(g)) {
            std::vector<float> u(p.regions[r].size());
            chain.streams[r].fill_unit(u);
            const auto res = metropolis_pass(m, chain.state, chain.beta, p.regions[r], u);
            chain.energy += res.delta_energy;
            chain.stats.accepted_flips += res.accepted;
            chain.stats.attempted_flips += u.size();
        }
    }
    ++chain.stats.sweeps;
}

std::vector<std::byte> run_bytes(const IsingModel& m, const RegionPartition* p, SweepMode mode,
                                 std::size_t workers, std::uint64_t sweeps) {
    auto e = make_ensemble(m, p, {geometric_ladder(0.4, 4.0, 6), 17, mode, 5});
    WorkerPool pool(workers);
    run(e, m, p, pool, {sweeps, {}});
    return encode_ensemble(e);
}

}  // namespace

TEST_CASE("ladders") {
    const auto t = geometric_ladder(0.5, 5.0, 4);
    REQUIRE(t.size() == 4);
    CHECK(t.front() == doctest::Approx(5.0));
    CHECK(t.back() == doctest::Approx(0.5));
    CHECK(t[1] / t[0] == doctest::Approx(t[2] / t[1]));
    CHECK(geometric_ladder(2.0, 3.0, 1) == std::vector<double>{3.0});
    CHECK_THROWS_AS(geometric_ladder(1.0, 1.0, 3), std::invalid_argument);
    CHECK_THROWS_AS(validate_ladder(std::vector<double>{1.0, 2.0}), std::invalid_argument);
    CHECK_THROWS_AS(validate_ladder(std::vector<double>{1.0, -2.0}), std::invalid_argument);

    std::stringstream io;
    write_ladder(io, t);
    CHECK(read_ladder(io) == t);
    std::istringstream bad("2.0\nabc\n");
    CHECK_THROWS_AS(read_ladder(bad), FormatError);
}

TEST_CASE("ensemble construction") {
    const auto m = random_model(10, 0.5, 1);
    const auto e = make_ensemble(m, nullptr, {{3.0, 2.0, 1.0}, 40, SweepMode::Coarse, 2});
    REQUIRE(e.chains.size() == 3);
    CHECK(e.chains[0].beta == doctest::Approx(1.0 / 3.0));
    CHECK(e.swap_stats.size() == 2);
    for (std::size_t c = 0; c < 3; ++c) {
        CHECK(e.chains[c].energy == doctest::Approx(energy(m, e.chains[c].state)));
        // The initial spins come from the chain's own stream: one word per site.
        RngStream expected(coarse_seed(40, c));
        for (std::size_t i = 0; i < 10; ++i) expected.next_u32();
        CHECK(e.chains[c].streams.front() == expected);
    }
    CHECK(e.swap_rng == RngStream(coarse_seed(40, 3)));
    CHECK_THROWS_AS(make_ensemble(m, nullptr, {{1.0}, 1, SweepMode::Regional, 1}), std::invalid_argument);
    CHECK_THROWS_AS(make_ensemble(m, nullptr, {{1.0}, 1, SweepMode::Coarse, 0}), std::invalid_argument);
}

TEST_CASE("infinite temperature flips every site") {
    const auto m = random_model(20, 0.5, 2);
    const auto e = make_ensemble(m, nullptr, {{1.0}, 3, SweepMode::Coarse, 1});
    Chain c = e.chains.front();
    c.beta = 0.0;
    const SpinState before = c.state;
    sweep(c, m);
    for (std::size_t i = 0; i < 20; ++i) CHECK(c.state[i] == -before[i]);
    CHECK(c.stats.accepted_flips == 20);
}

TEST_CASE("downhill moves are always accepted") {
    IsingModel m(1, {1.0f}, {});
    SpinState s = SpinState::from_bits(1, 1);  // spin -1 against a positive field
    const SiteIndex site[] = {0};
    const float draw[] = {0.9999999f};
    const auto r = metropolis_pass(m, s, 100.0, site, draw);
    CHECK(r.accepted == 1);
    CHECK(s[0] == 1);
    CHECK(r.delta_energy == doctest::Approx(-2.0));
}

TEST_CASE("a sweep consumes one draw per site") {
    const auto m = random_model(37, 0.3, 3);
    Chain c = single_chain(m, 1.0, 8);
    RngStream mirror = c.streams.front();
    for (int s = 0; s < 5; ++s) sweep(c, m);
    for (int k = 0; k < 5 * 37; ++k) mirror.next_u32();
    CHECK(c.streams.front() == mirror);
    CHECK(c.energy == doctest::Approx(energy(m, c.state)).epsilon(1e-6));
}

TEST_CASE("single chain samples the Boltzmann distribution") {
    const auto m = random_model(4, 1.0, 11);
    const auto exact = boltzmann(m, 0.5);
    Chain c = single_chain(m, 2.0, 5);
    std::vector<double> hist(16, 0.0);
    constexpr int kSweeps = 1'000'000;
    for (int s = 0; s < kSweeps; ++s) {
        sweep(c, m);
        hist[c.state.to_bits()] += 1.0 / kSweeps;
    }
    CHECK(total_variation(hist, exact) < 0.01);
}

TEST_CASE("swap acceptance formula") {
    CHECK(swap_acceptance(0.7, 0.7, 3.0, -5.0) == 1.0);
    CHECK(swap_acceptance(0.2, 0.9, 1.5, 1.5) == 1.0);
    CHECK(swap_acceptance(0.5, 1.0, 3.0, 1.0) == doctest::Approx(std::exp(-1.0)));
    CHECK(swap_acceptance(1.0, 0.5, 1.0, 3.0) == doctest::Approx(std::exp(-1.0)));
    CHECK(swap_acceptance(0.5, 1.0, 1.0, 3.0) == 1.0);
}

TEST_CASE("measured swap rate matches the formula") {
    IsingModel m(1, {0.0f}, {});
    Chain lower = single_chain(m, 2.0, 1), upper = single_chain(m, 1.0, 2);
    lower.state = SpinState::from_bits(1, 0);
    upper.state = SpinState::from_bits(1, 1);
    RngStream rng(99);
    constexpr int kTrials = 100'000;
    int accepted = 0;
    for (int t = 0; t < kTrials; ++t) {
        lower.energy = 3.0;
        upper.energy = 1.0;
        if (attempt_swap(lower, upper, rng)) {
            ++accepted;
            std::swap(lower.state, upper.state);  // keep the fixed energies attached to their slots
        }
    }
    const double p = std::exp(-1.0);
    const double sigma = std::sqrt(p * (1 - p) / kTrials);
    CHECK(std::abs(static_cast<double>(accepted) / kTrials - p) < 3 * sigma);
}

TEST_CASE("swap moves states and energies but not temperatures or streams") {
    IsingModel m(2, {0.0f, 0.0f}, {{0, 1, 1.0f}});
    Chain a = single_chain(m, 2.0, 1), b = single_chain(m, 1.0, 2);
    a.state = SpinState::from_bits(2, 0b00);
    a.energy = energy(m, a.state);
    b.state = SpinState::from_bits(2, 0b01);
    b.energy = energy(m, b.state);
    const auto sa = a.streams, sb = b.streams;
    RngStream rng(1), mirror(1);
    REQUIRE(attempt_swap(a, b, rng));  // the hot slot held the lower energy: always accepted
    mirror.next_u32();
    CHECK(rng == mirror);
    CHECK(a.state.to_bits() == 0b01);
    CHECK(b.state.to_bits() == 0b00);
    CHECK(a.energy == 1.0);
    CHECK(b.energy == -1.0);
    CHECK(a.beta == 0.5);
    CHECK(a.streams == sa);
    CHECK(b.streams == sb);
}

TEST_CASE("swap phase pairing alternates") {
    IsingModel m(3, {0, 0, 0}, {});
    auto e = make_ensemble(m, nullptr, {{5, 4, 3, 2, 1}, 1, SweepMode::Coarse, 1});
    for (std::size_t c = 0; c < 5; ++c) e.chains[c].state = SpinState::from_bits(3, c);
    swap_phase(e);
    CHECK(e.swap_stats[0].attempted == 1);
    CHECK(e.swap_stats[1].attempted == 0);
    CHECK(e.swap_stats[2].attempted == 1);
    CHECK(e.swap_stats[3].attempted == 0);
    CHECK(e.chains[4].state.to_bits() == 4);  // untouched
    swap_phase(e);
    CHECK(e.swap_stats[0].attempted == 1);
    CHECK(e.swap_stats[1].attempted == 1);
    CHECK(e.swap_stats[3].attempted == 1);
    CHECK(e.swap_counter == 2);
    CHECK(e.swap_parity == 0);
}

TEST_CASE("swapping equal states is the identity") {
    const auto m = random_model(5, 0.6, 4);
    auto e = make_ensemble(m, nullptr, {{2.0, 1.0}, 6, SweepMode::Coarse, 1});
    e.chains[1].state = e.chains[0].state;
    e.chains[1].energy = e.chains[0].energy;
    const SpinState s = e.chains[0].state;
    for (int k = 0; k < 10; ++k) swap_phase(e);
    CHECK(e.chains[0].state == s);
    CHECK(e.chains[1].state == s);
}

TEST_CASE("regional sweep equals the serial region-ordered reference") {
    const auto p = layered(6, 8, 2);
    auto e = make_ensemble(p.model, &p.partition, {{1.5}, 9, SweepMode::Regional, 1});
    Chain ours = e.chains.front();
    Chain ref = ours;
    for (const std::size_t workers : {1u, 4u, 8u}) {
        WorkerPool pool(workers);
        for (int s = 0; s < 30; ++s) {
            sweep_regional(ours, p.model, p.partition, pool);
            reference_regional_sweep(ref, p.model, p.partition);
        }
        REQUIRE(ours.state == ref.state);
        REQUIRE(ours.streams == ref.streams);
        REQUIRE(std::bit_cast<std::uint64_t>(ours.energy) == std::bit_cast<std::uint64_t>(ref.energy));
        CHECK(ours.stats.accepted_flips == ref.stats.accepted_flips);
    }
    CHECK(ours.energy == doctest::Approx(energy(p.model, ours.state)).epsilon(1e-6));
}

TEST_CASE("independent regions can be swept in any order") {
    // No inter-region couplings: two disconnected pairs.
    IsingModel m(4, {0.1f, -0.2f, 0.3f, 0.0f}, {{0, 1, 1.0f}, {2, 3, -0.5f}});
    RegionPartition part{{{0, 1}, {2, 3}}, {RegionGroup::A, RegionGroup::A}};
    auto e = make_ensemble(m, &part, {{1.0}, 4, SweepMode::Regional, 1});
    Chain ours = e.chains.front();
    Chain reversed = ours;
    WorkerPool pool(2);
    for (int s = 0; s < 50; ++s) {
        sweep_regional(ours, m, part, pool);
        for (const std::size_t r : {1u, 0u}) {
            std::vector<float> u(2);
            reversed.streams[r].fill_unit(u);
            metropolis_pass(m, reversed.state, reversed.beta, part.regions[r], u);
        }
    }
    CHECK(ours.state == reversed.state);
}

TEST_CASE("final ensembles do not depend on the worker count") {
    const auto p = layered(4, 8, 5);
    for (const SweepMode mode : {SweepMode::Coarse, SweepMode::Regional}) {
        const auto one = run_bytes(p.model, &p.partition, mode, 1, 200);
        for (const std::size_t w : {2u, 4u, 8u}) CHECK(run_bytes(p.model, &p.partition, mode, w, 200) == one);
    }
}

TEST_CASE("run schedule") {
    const auto m = random_model(8, 0.5, 6);
    WorkerPool pool(2);
    SUBCASE("one swap phase when a phase covers the whole run") {
        auto e = make_ensemble(m, nullptr, {{2.0, 1.0}, 1, SweepMode::Coarse, 40});
        int phases = 0;
        const auto r = run(e, m, nullptr, pool, {40, {}}, {[&](const Ensemble&, const PhaseRecord&) { ++phases; }});
        CHECK(phases == 1);
        CHECK(r.phases == 1);
        CHECK(e.swap_counter == 1);
        CHECK(e.chains[0].stats.sweeps == 40);
    }
    SUBCASE("partial phases round up") {
        auto e = make_ensemble(m, nullptr, {{2.0, 1.0}, 1, SweepMode::Coarse, 10});
        const auto r = run(e, m, nullptr, pool, {25, {}});
        CHECK(r.rounded_up);
        CHECK(r.scheduled_sweeps == 30);
        CHECK(e.sweep_counter == 30);
    }
    SUBCASE("zero sweeps") {
        auto e = make_ensemble(m, nullptr, {{2.0, 1.0}, 1, SweepMode::Coarse, 10});
        const auto before = encode_ensemble(e);
        const auto r = run(e, m, nullptr, pool, {0, {}});
        CHECK(r.phases == 0);
        CHECK(encode_ensemble(e) == before);
    }
    SUBCASE("phase records") {
        auto e = make_ensemble(m, nullptr, {{3.0, 2.0, 1.0}, 1, SweepMode::Coarse, 5});
        std::vector<PhaseRecord> recs;
        run(e, m, nullptr, pool, {50, {}}, {[&](const Ensemble&, const PhaseRecord& r) { recs.push_back(r); }});
        REQUIRE(recs.size() == 10);
        CHECK(recs.back().phase == 10);
        CHECK(recs.back().sweep_counter == 50);
        CHECK(recs.back().energies.size() == 3);
        CHECK(recs.back().swap_rates.size() == 2);
        CHECK(e.chains[0].stats.energy_samples == 10);
    }
}

TEST_CASE("hot chains flip more") {
    const auto p = layered(8, 8, 12);
    const auto temps = geometric_ladder(0.3, 5.0, 8);
    auto e = make_ensemble(p.model, nullptr, {temps, 2, SweepMode::Coarse, 10});
    WorkerPool pool(1);
    run(e, p.model, nullptr, pool, {3000, {}});
    for (std::size_t c = 0; c + 1 < e.chains.size(); ++c) {
        const auto& hot = e.chains[c].stats;
        const auto& cold = e.chains[c + 1].stats;
        const double n = static_cast<double>(hot.attempted_flips);
        const double sigma = std::sqrt(hot.flip_rate() * (1 - hot.flip_rate()) / n +
                                       cold.flip_rate() * (1 - cold.flip_rate()) / n);
        CHECK(hot.flip_rate() + 3 * sigma >= cold.flip_rate());
    }
    CHECK(e.chains.front().stats.flip_rate() > e.chains.back().stats.flip_rate());
}

TEST_CASE("ensemble encoding round-trips and rejects damage") {
    const auto p = layered(3, 4, 1);
    auto e = make_ensemble(p.model, &p.partition, {{2.0, 1.0, 0.5}, 3, SweepMode::Regional, 2});
    WorkerPool pool(2);
    run(e, p.model, &p.partition, pool, {20, {}});
    const auto bytes = encode_ensemble(e);
    ByteReader r(bytes);
    const auto back = decode_ensemble(r);
    CHECK(r.remaining() == 0);
    CHECK(encode_ensemble(back) == bytes);

    auto cut = bytes;
    cut.resize(cut.size() / 2);
    ByteReader rc(cut);
    CHECK_THROWS_AS(decode_ensemble(rc), FormatError);
}
