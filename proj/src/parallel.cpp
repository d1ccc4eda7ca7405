#include "ptmc/parallel.hpp"

#include <algorithm>
#include <iostream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

#if defined(__linux__)
#include <sys/resource.h>
#include <sys/syscall.h>
#include <unistd.h>
#endif

namespace ptmc {

namespace {

bool lower_current_thread_priority() {
#if defined(__linux__)
    // On Linux the nice value is per thread when addressed by tid.
    const auto tid = static_cast<id_t>(::syscall(SYS_gettid));
    return ::setpriority(PRIO_PROCESS, tid, 10) == 0;
#else
    return false;
#endif
}

}  // namespace

WorkerPool::WorkerPool(std::size_t workers, WorkerPriority priority)
    : workers_(workers),
      priority_(priority),
      start_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(workers, 1))),
      finish_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(workers, 1))) {
    if (workers == 0) throw std::invalid_argument("worker pool needs at least one worker");
    threads_.reserve(workers - 1);
    for (std::size_t i = 1; i < workers; ++i) {
        threads_.emplace_back([this, i] { worker_loop(i); });
    }
}

WorkerPool::~WorkerPool() {
    if (threads_.empty()) return;
    stopping_ = true;
    start_.arrive_and_wait();
    threads_.clear();
}

void WorkerPool::worker_loop(std::size_t index) {
    if (priority_ == WorkerPriority::BelowNormal && !lower_current_thread_priority()) {
        if (priority_applied_.exchange(false)) {
            std::clog << "ptmc: could not lower worker thread priority on this platform\n";
        }
    }
    for (;;) {
        start_.arrive_and_wait();
        if (stopping_) return;
        invoke(index);
        finish_.arrive_and_wait();
    }
}

void WorkerPool::invoke(std::size_t index) {
    try {
        (*job_)(index);
    } catch (...) {
        const std::lock_guard lock(error_mutex_);
        if (!error_) error_ = std::current_exception();
    }
}

void WorkerPool::run(const std::function<void(std::size_t)>& job) {
    job_ = &job;
    error_ = nullptr;
    start_.arrive_and_wait();
    invoke(0);
    finish_.arrive_and_wait();
    job_ = nullptr;
    if (error_) std::rethrow_exception(std::exchange(error_, nullptr));
}

WorkPool build_work_pool(std::span<const double> temperatures) {
    std::vector<std::size_t> order(temperatures.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return temperatures[a] > temperatures[b]; });
    return WorkPool(std::move(order));
}

void run_phase(WorkerPool& workers, WorkPool& pool, const std::function<void(std::size_t)>& task) {
    pool.reset();
    workers.run([&](std::size_t) {
        while (const auto chain = pool.claim_next()) task(*chain);
    });
}

// ---------------------------------------------------------------------------

namespace {

std::size_t blocks_for(std::size_t chains, std::size_t packed) {
    return chains / packed + (chains % packed == 0 ? 0 : 1);
}

}  // namespace

PackingPlan plan_packing(const PackingRequest& r) {
    if (r.num_chains == 0 || r.processor_count == 0 || r.block_size == 0 || r.max_threads_per_block == 0) {
        throw std::invalid_argument("plan_packing: counts must be positive");
    }
    if (r.block_size > r.max_threads_per_block) {
        throw std::invalid_argument("plan_packing: block size exceeds the per-block thread limit");
    }
    std::size_t packed = 1;
    std::size_t blocks = blocks_for(r.num_chains, packed);
    // Stop packing once processors would start going unused.
    while (packed * r.block_size < r.max_threads_per_block && blocks > r.processor_count &&
           2 * packed * r.block_size <= r.max_threads_per_block) {
        packed *= 2;
        blocks = blocks_for(r.num_chains, packed);
    }
    std::size_t fallbacks = 0;
    while (packed * r.registers_per_chain > r.registers_available && packed > 1) {
        packed /= 2;
        blocks = blocks_for(r.num_chains, packed);
        ++fallbacks;
    }
    if (packed * r.registers_per_chain > r.registers_available) {
        throw std::runtime_error("plan_packing: one chain needs " + std::to_string(r.registers_per_chain) +
                                 " registers, only " + std::to_string(r.registers_available) + " available");
    }
    const std::size_t resident = std::min(blocks, r.processor_count) * packed;
    return PackingPlan{r.block_size, packed, blocks, std::min(resident, r.num_chains), fallbacks};
}

// ---------------------------------------------------------------------------

std::chrono::nanoseconds throttle(const ThrottleConfig& config, std::chrono::nanoseconds active) {
    const double d = config.duty_cycle;
    if (!(d > 0.0 && d <= 1.0)) {
        throw std::invalid_argument("duty cycle must be in (0, 1], got " + std::to_string(d));
    }
    if (d == 1.0 || active.count() <= 0) return std::chrono::nanoseconds{0};
    return std::chrono::nanoseconds{static_cast<std::int64_t>(static_cast<double>(active.count()) * (1.0 - d) / d)};
}

}  // namespace ptmc
