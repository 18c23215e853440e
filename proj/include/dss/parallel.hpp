#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dss {

inline unsigned default_thread_count() {
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1u : hc;
}

/// Runs fn(task, worker) for task in [0, n_tasks) on up to `threads` workers.
/// Tasks are handed out dynamically; callers must make per-task results
/// independent of which worker ran them. The first exception is rethrown.
template <typename Fn>
void parallel_for(std::size_t n_tasks, unsigned threads, Fn&& fn) {
    if (n_tasks == 0) return;
    const auto workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), n_tasks));
    if (workers == 1) {
        for (std::size_t t = 0; t < n_tasks; ++t) fn(t, 0u);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t t = next.fetch_add(1); t < n_tasks; t = next.fetch_add(1)) {
                try {
                    fn(t, w);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next.store(n_tasks);
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace dss
