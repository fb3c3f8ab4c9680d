#pragma once

#include <cstdint>
#include <thread>
#include <vector>

namespace segdesic {

/// Number of worker threads. Resolved once from SEGDESIC_THREADS
/// (0 or unset = hardware concurrency); can be overridden programmatically.
int worker_count();
void set_worker_count(int n); // 0 = auto

/// Splits [0, n) into contiguous chunks, one per worker. Each index is
/// processed by exactly one worker with a fixed per-index computation, so
/// results are bitwise identical for any worker count.
template <typename Fn>
void parallel_for(std::int64_t n, Fn&& fn) {
    int workers = worker_count();
    if (workers <= 1 || n < 2) {
        fn(std::int64_t{0}, n);
        return;
    }
    if (static_cast<std::int64_t>(workers) > n) workers = static_cast<int>(n);
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(workers - 1));
    std::int64_t chunk = (n + workers - 1) / workers;
    for (int w = 1; w < workers; ++w) {
        std::int64_t lo = w * chunk;
        std::int64_t hi = std::min<std::int64_t>(n, lo + chunk);
        if (lo >= hi) break;
        threads.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    fn(std::int64_t{0}, std::min<std::int64_t>(n, chunk));
    for (auto& t : threads) t.join();
}

} // namespace segdesic
