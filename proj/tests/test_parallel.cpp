#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <mutex>
#include <numeric>
#include <queue>
#include <set>
#include <stdexcept>
#include <thread>
#include <vector>

#include "ptmc/parallel.hpp"

using namespace ptmc;
using namespace std::chrono_literals;

namespace {

std::vector<std::size_t> order_of(const WorkPool& p) { return {p.order().begin(), p.order().end()}; }

// Greedy list scheduling: whenever a worker becomes free it takes the next task.
double makespan_dynamic(const std::vector<std::size_t>& order, const std::vector<double>& cost, std::size_t workers) {
    std::priority_queue<double, std::vector<double>, std::greater<>> free_at;
    for (std::size_t w = 0; w < workers; ++w) free_at.push(0.0);
    double end = 0.0;
    for (const std::size_t t : order) {
        const double start = free_at.top();
        free_at.pop();
        free_at.push(start + cost[t]);
        end = std::max(end, start + cost[t]);
    }
    return end;
}

// Static split into equal contiguous blocks of chain indices.
double makespan_contiguous(const std::vector<double>& cost, std::size_t workers) {
    const std::size_t n = cost.size();
    double end = 0.0;
    for (std::size_t w = 0; w < workers; ++w) {
        double sum = 0.0;
        for (std::size_t i = w * n / workers; i < (w + 1) * n / workers; ++i) sum += cost[i];
        end = std::max(end, sum);
    }
    return end;
}

PackingPlan plan(std::size_t chains, std::size_t processors, std::size_t block = 32, std::size_t budget = 16384,
                 std::size_t per_chain = 0) {
    return plan_packing({chains, processors, block, 512, budget, per_chain});
}

}  // namespace

TEST_CASE("work pool order is hottest first and stable") {
    CHECK(order_of(build_work_pool(std::vector<double>{1.0, 3.0, 2.0})) == std::vector<std::size_t>{1, 2, 0});
    CHECK(order_of(build_work_pool(std::vector<double>{2.0, 2.0, 2.0, 2.0})) ==
          std::vector<std::size_t>{0, 1, 2, 3});
    CHECK(order_of(build_work_pool(std::vector<double>{5.0, 4.0, 1.0})) == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("claims run in order and reset between phases") {
    WorkPool p({4, 2, 9});
    CHECK(*p.claim_next() == 4);
    CHECK(*p.claim_next() == 2);
    CHECK(*p.claim_next() == 9);
    CHECK_FALSE(p.claim_next());
    CHECK_FALSE(p.claim_next());
    p.reset();
    CHECK(*p.claim_next() == 4);
}

TEST_CASE("concurrent claims hand out every chain exactly once") {
    std::vector<std::size_t> order(100);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (int round = 0; round < 50; ++round) {
        WorkPool p(order);
        std::mutex m;
        std::vector<std::size_t> seen;
        {
            std::vector<std::jthread> threads;
            for (int w = 0; w < 8; ++w) {
                threads.emplace_back([&] {
                    std::vector<std::size_t> mine;
                    while (const auto c = p.claim_next()) mine.push_back(*c);
                    std::lock_guard lock(m);
                    seen.insert(seen.end(), mine.begin(), mine.end());
                });
            }
        }
        std::sort(seen.begin(), seen.end());
        REQUIRE(seen == order);
    }
}

TEST_CASE("one worker executes tasks in work-pool order") {
    WorkerPool workers(1);
    WorkPool p({3, 0, 2, 1});
    std::vector<std::size_t> ran;
    run_phase(workers, p, [&](std::size_t c) { ran.push_back(c); });
    CHECK(ran == std::vector<std::size_t>{3, 0, 2, 1});
}

TEST_CASE("phases are separated by barriers") {
    WorkerPool workers(4);
    WorkPool p(std::vector<std::size_t>(10, 0));
    std::atomic<int> phase{0};
    std::atomic<bool> mixed{false};
    for (int k = 0; k < 200; ++k) {
        std::atomic<int> done{0};
        run_phase(workers, p, [&](std::size_t) {
            if (phase.load() != k) mixed = true;
            ++done;
        });
        REQUIRE(done == 10);
        ++phase;
    }
    CHECK_FALSE(mixed);
}

TEST_CASE("every worker runs the job once and more workers than tasks is fine") {
    WorkerPool workers(6);
    CHECK(workers.size() == 6);
    std::mutex m;
    std::multiset<std::size_t> ids;
    workers.run([&](std::size_t id) {
        std::lock_guard lock(m);
        ids.insert(id);
    });
    CHECK(ids == std::multiset<std::size_t>{0, 1, 2, 3, 4, 5});

    WorkPool two({0, 1});
    std::atomic<int> count{0};
    run_phase(workers, two, [&](std::size_t) { ++count; });
    CHECK(count == 2);
}

TEST_CASE("a failing task surfaces on the caller and the pool stays usable") {
    WorkerPool workers(3);
    WorkPool p({0, 1, 2, 3, 4});
    CHECK_THROWS_AS(run_phase(workers, p, [](std::size_t c) {
                        if (c == 3) throw std::runtime_error("boom");
                    }),
                    std::runtime_error);
    std::atomic<int> count{0};
    run_phase(workers, p, [&](std::size_t) { ++count; });
    CHECK(count == 5);
}

TEST_CASE("below-normal priority is requested without failing") {
    WorkerPool workers(2, WorkerPriority::BelowNormal);
    std::atomic<int> count{0};
    workers.run([&](std::size_t) { ++count; });
    CHECK(count == 2);
    MESSAGE("priority applied: " << workers.priority_applied());
}

TEST_CASE("hottest-first beats contiguous blocks when hot chains cost more") {
    std::vector<double> temps, cost;
    for (int c = 0; c < 24; ++c) {
        temps.push_back(5.0 - 0.2 * c);  // index 0 is hottest
        cost.push_back(1.0 + 0.5 * temps.back() * temps.back());
    }
    const auto hottest = order_of(build_work_pool(temps));
    for (const std::size_t workers : {2u, 3u, 4u, 8u}) {
        CAPTURE(workers);
        CHECK(makespan_dynamic(hottest, cost, workers) <= makespan_contiguous(cost, workers));
    }
}

TEST_CASE("packing traces") {
    const auto p = plan(111, 30);
    CHECK(p.packed_chains == 4);
    CHECK(p.num_blocks == 28);
    CHECK(p.parallel_chains == 111);

    const auto one = plan(1, 30);
    CHECK(one.packed_chains == 1);
    CHECK(one.num_blocks == 1);

    // Register budgets: 64 threads per chain, 2,048 registers per chain.
    const auto old_card = plan(240, 30, 64, 8192, 2048);
    const auto new_card = plan(240, 30, 64, 16384, 2048);
    CHECK(old_card.packed_chains == 4);
    CHECK(old_card.register_fallbacks == 1);
    CHECK(old_card.parallel_chains == 120);
    CHECK(new_card.packed_chains == 8);
    CHECK(new_card.parallel_chains == 240);

    CHECK_THROWS_AS(plan(10, 2, 32, 1000, 2048), std::runtime_error);
    CHECK_THROWS_AS(plan(0, 2), std::invalid_argument);
    CHECK_THROWS_AS(plan_packing({4, 2, 1024, 512}), std::invalid_argument);
}

TEST_CASE("packing invariants over a grid") {
    for (const std::size_t block : {16u, 24u, 32u, 48u, 64u, 96u, 512u}) {
        for (const std::size_t procs : {1u, 4u, 30u}) {
            std::size_t prev_packed = 0;
            for (std::size_t chains = 1; chains <= 400; ++chains) {
                const auto p = plan(chains, procs, block);
                REQUIRE(p.packed_chains * block <= 512);
                REQUIRE(p.num_blocks * p.packed_chains >= chains);
                REQUIRE(p.parallel_chains <= chains);
                REQUIRE(p.packed_chains >= prev_packed);
                prev_packed = p.packed_chains;
            }
        }
    }
}

TEST_CASE("block count is not monotone in the chain count") {
    // Crossing the processor count doubles the packing and halves the blocks.
    CHECK(plan(30, 30).num_blocks == 30);
    CHECK(plan(31, 30).num_blocks == 16);
}

TEST_CASE("throttle idle time") {
    CHECK(throttle({1.0}, 100ms) == 0ns);
    CHECK(throttle({0.5}, 100ms) == 100ms);
    CHECK(throttle({0.25}, 100ms) == 300ms);
    CHECK(throttle({0.25}, 0ns) == 0ns);
    CHECK_THROWS_AS(throttle({0.0}, 1ms), std::invalid_argument);
    CHECK_THROWS_AS(throttle({1.5}, 1ms), std::invalid_argument);
}
