#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "ptmc/persist.hpp"

using namespace ptmc;
namespace fs = std::filesystem;

namespace {

struct Fixture {
    LayeredProblem problem;
    Fixture() : problem(make()) {}
    static LayeredProblem make() {
        RngStream rng(21);
        return generate_layered(random_slice(4, {}, rng), 4, 1.0f);
    }
    Ensemble fresh(SweepMode mode) const {
        return make_ensemble(problem.model, &problem.partition, {geometric_ladder(0.5, 3.0, 4), 8, mode, 2});
    }
};

fs::path temp_file(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "ptmc_test_persist";
    fs::create_directories(dir);
    return dir / name;
}

std::vector<std::byte> read_all(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::vector<char> raw{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    const auto b = std::as_bytes(std::span{raw});
    return {b.begin(), b.end()};
}

void write_all(const fs::path& p, std::span<const std::byte> bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("save then load reproduces the ensemble bytes") {
    Fixture f;
    for (const SweepMode mode : {SweepMode::Coarse, SweepMode::Regional}) {
        auto e = f.fresh(mode);
        WorkerPool pool(2);
        run(e, f.problem.model, &f.problem.partition, pool, {12, {}});
        const auto path = temp_file("roundtrip.ckpt");
        persist::save(e, f.problem.model, {100}, path);
        CHECK_FALSE(fs::exists(fs::path(path) += ".tmp"));
        const auto cp = persist::load(path, f.problem.model);
        CHECK(encode_ensemble(cp.ensemble) == encode_ensemble(e));
        CHECK(cp.schedule.total_sweeps == 100);
        CHECK(cp.ensemble.sweep_counter == 12);
        CHECK(cp.ensemble.swap_counter == 6);
        CHECK(cp.model_fingerprint == f.problem.model.fingerprint());
    }
}

TEST_CASE("split run equals a straight run") {
    Fixture f;
    for (const SweepMode mode : {SweepMode::Coarse, SweepMode::Regional}) {
        WorkerPool pool(3);
        auto straight = f.fresh(mode);
        run(straight, f.problem.model, &f.problem.partition, pool, {200, {}});

        auto first = f.fresh(mode);
        run(first, f.problem.model, &f.problem.partition, pool, {100, {}});
        const auto path = temp_file("split.ckpt");
        persist::save(first, f.problem.model, {200}, path);
        auto resumed = persist::load(path, f.problem.model);
        run(resumed.ensemble, f.problem.model, &f.problem.partition, pool, {resumed.schedule.total_sweeps, {}});
        CHECK(encode_ensemble(resumed.ensemble) == encode_ensemble(straight));
    }
}

TEST_CASE("corrupt or mismatched checkpoints are rejected") {
    Fixture f;
    const auto e = f.fresh(SweepMode::Coarse);
    const auto good = persist::encode(e, f.problem.model, {10});

    SUBCASE("different model") {
        RngStream rng(22);
        const auto other = generate_layered(random_slice(4, {}, rng), 4, 1.0f);
        CHECK_THROWS_WITH_AS(persist::decode(good, other.model), doctest::Contains("fingerprint"),
                             persist::CheckpointError);
    }
    SUBCASE("every truncation") {
        for (std::size_t len = 0; len < good.size(); len += 7) {
            const std::span<const std::byte> cut(good.data(), len);
            REQUIRE_THROWS_AS(persist::decode(cut, f.problem.model), persist::CheckpointError);
        }
    }
    SUBCASE("byte flip inside the swap stream state") {
        auto bad = good;
        // Header, then the ensemble fields that precede the swap stream, then some way into its words.
        const std::size_t offset = 36 + 30 + 400;
        bad[offset] ^= std::byte{0x10};
        CHECK_THROWS_WITH_AS(persist::decode(bad, f.problem.model), doctest::Contains("checksum"),
                             persist::CheckpointError);
    }
    SUBCASE("flips anywhere are caught") {
        for (std::size_t i = 0; i < good.size(); i += 13) {
            auto bad = good;
            bad[i] ^= std::byte{1};
            REQUIRE_THROWS_AS(persist::decode(bad, f.problem.model), persist::CheckpointError);
        }
    }
    SUBCASE("bad magic and version") {
        auto bad = good;
        bad[0] = std::byte{'X'};
        CHECK_THROWS_WITH_AS(persist::decode(bad, f.problem.model), doctest::Contains("magic"),
                             persist::CheckpointError);
        bad = good;
        bad[8] = std::byte{2};
        CHECK_THROWS_WITH_AS(persist::decode(bad, f.problem.model), doctest::Contains("version"),
                             persist::CheckpointError);
    }
    SUBCASE("truncated file on disk") {
        const auto path = temp_file("truncated.ckpt");
        write_all(path, std::span(good).first(good.size() / 2));
        CHECK_THROWS_AS(persist::load(path, f.problem.model), persist::CheckpointError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(persist::load(temp_file("does-not-exist.ckpt"), f.problem.model), std::runtime_error);
    }
}

TEST_CASE("checkpoint sink saves on its interval") {
    Fixture f;
    auto e = f.fresh(SweepMode::Coarse);
    const auto path = temp_file("sink.ckpt");
    fs::remove(path);
    persist::CheckpointSink never(path, std::chrono::hours(1), f.problem.model, {40});
    persist::CheckpointSink always(path, std::chrono::seconds(0), f.problem.model, {40});
    WorkerPool pool(1);
    run(e, f.problem.model, nullptr, pool, {40, {}}, {[&](const Ensemble& en, const PhaseRecord& r) {
            never(en, r);
            always(en, r);
        }});
    CHECK(never.saves() == 0);
    CHECK(always.saves() == 20);
    const auto cp = persist::load(path, f.problem.model);
    CHECK(encode_ensemble(cp.ensemble) == encode_ensemble(e));
    CHECK(read_all(path) == persist::encode(e, f.problem.model, {40}));
}
