#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace mig {

/// Runs body(begin, end) over contiguous chunks of [0, n). Each index is visited exactly once,
/// so results written per index are independent of the thread count.
template <typename Body>
void parallel_for(std::size_t n, int threads, Body &&body) {
    std::size_t workers = std::clamp<std::size_t>(threads < 1 ? 1 : static_cast<std::size_t>(threads), 1, n == 0 ? 1 : n);
    if (workers <= 1) {
        body(std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        std::size_t begin = w * chunk;
        std::size_t end = std::min(n, begin + chunk);
        if (begin >= end)
            break;
        pool.emplace_back([&body, begin, end] { body(begin, end); });
    }
    for (auto &t : pool)
        t.join();
}

} // namespace mig
