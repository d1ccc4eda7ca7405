#pragma once
// Execution machinery: persistent workers separated by barriers, a
// hottest-first chain work pool, the chain-packing planner, and the duty-cycle
// throttle.

#include <atomic>
#include <barrier>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <thread>
#include <vector>

namespace ptmc {

enum class WorkerPriority { Normal, BelowNormal };

/// Long-lived workers created once per run. The calling thread acts as worker
/// 0, so a pool of one worker spawns no threads.
class WorkerPool {
public:
    explicit WorkerPool(std::size_t workers, WorkerPriority priority = WorkerPriority::Normal);
    ~WorkerPool();

    WorkerPool(const WorkerPool&) = delete;
    WorkerPool& operator=(const WorkerPool&) = delete;

    std::size_t size() const { return workers_; }

    /// False when lowering priority was requested but the platform refused.
    bool priority_applied() const { return priority_applied_.load(); }

    /// Runs job(worker_index) on every worker and returns once all have passed
    /// the closing barrier. The first exception thrown by any worker is
    /// rethrown here, after the barrier.
    void run(const std::function<void(std::size_t)>& job);

private:
    void worker_loop(std::size_t index);
    void invoke(std::size_t index);

    std::size_t workers_;
    WorkerPriority priority_;
    std::atomic<bool> priority_applied_{true};
    std::barrier<> start_;
    std::barrier<> finish_;
    const std::function<void(std::size_t)>* job_ = nullptr;
    bool stopping_ = false;
    std::mutex error_mutex_;
    std::exception_ptr error_;
    std::vector<std::jthread> threads_;
};

/// Chains in descending temperature order (hottest, i.e. most work, first),
/// handed out first-come first-served through one atomic claim index.
class WorkPool {
public:
    explicit WorkPool(std::vector<std::size_t> order) : order_(std::move(order)) {}

    WorkPool(const WorkPool& other) : order_(other.order_), next_(other.next_.load()) {}

    std::optional<std::size_t> claim_next() {
        const std::size_t k = next_.fetch_add(1, std::memory_order_relaxed);
        if (k >= order_.size()) return std::nullopt;
        return order_[k];
    }

    /// Restarts claims from order()[0]; call only between phases.
    void reset() { next_.store(0, std::memory_order_relaxed); }

    std::span<const std::size_t> order() const { return order_; }
    std::size_t size() const { return order_.size(); }

private:
    std::vector<std::size_t> order_;
    std::atomic<std::size_t> next_{0};
};

/// Sorts chain indices by descending temperature, ties by ascending index.
WorkPool build_work_pool(std::span<const double> temperatures);

/// One phase: resets the pool, then every worker claims and runs tasks until
/// the pool is exhausted. Returns after the closing barrier.
void run_phase(WorkerPool& workers, WorkPool& pool, const std::function<void(std::size_t)>& task);

// ---------------------------------------------------------------------------
// Chain packing

struct PackingRequest {
    std::size_t num_chains = 1;
    std::size_t processor_count = 1;
    std::size_t block_size = 32;
    std::size_t max_threads_per_block = 512;
    std::size_t registers_available = 16384;
    /// Registers used by one chain's block of threads.
    std::size_t registers_per_chain = 0;
};

struct PackingPlan {
    std::size_t block_size;
    std::size_t packed_chains;
    std::size_t num_blocks;
    /// Chains resident at once: min(num_blocks, processors) * packed_chains, capped at num_chains.
    std::size_t parallel_chains;
    /// Times the register fallback halved packed_chains.
    std::size_t register_fallbacks;
};

/// Doubles chains-per-block while blocks stay under the thread cap and more
/// blocks than processors remain, then halves while register demand exceeds
/// the budget. Throws std::invalid_argument for zero counts and
/// std::runtime_error when one chain per block still exceeds the budget.
PackingPlan plan_packing(const PackingRequest& request);

// ---------------------------------------------------------------------------
// Throttle

struct ThrottleConfig {
    /// Target fraction of wall-clock time spent computing, in (0, 1].
    double duty_cycle = 1.0;
    WorkerPriority priority = WorkerPriority::Normal;
};

/// Idle time to insert after an active burst: active * (1 - d) / d.
/// Throws std::invalid_argument when duty_cycle is outside (0, 1].
std::chrono::nanoseconds throttle(const ThrottleConfig& config, std::chrono::nanoseconds active);

}  // namespace ptmc
