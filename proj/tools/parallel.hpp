#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace nivtk::cli {

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Callers store
/// results into pre-sized slots indexed by i, so the outcome is identical
/// for any thread count.
template <typename Fn>
void run_indexed(std::size_t n, unsigned threads, Fn&& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t chunk = (n + threads - 1) / threads;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
        const std::size_t lo = std::min<std::size_t>(t * chunk, n);
        const std::size_t hi = std::min<std::size_t>(lo + chunk, n);
        if (lo >= hi) break;
        pool.emplace_back([&fn, lo, hi] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace nivtk::cli
