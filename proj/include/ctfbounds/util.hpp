#pragma once

#include <cstdint>
#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace ctf {

// Compensated (Kahan) accumulator for probability sums.
struct KahanSum {
    double sum = 0.0;
    double comp = 0.0;

    void add(double x) {
        double y = x - comp;
        double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    double value() const { return sum; }
};

// Worker-thread cap: CTFBOUNDS_THREADS when set, hardware concurrency otherwise.
inline int worker_thread_cap() {
    if (const char* env = std::getenv("CTFBOUNDS_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(i) for i in [0, n). Work items are distributed statically so the
// assignment of items to logical shards never depends on thread timing; any
// shard-level randomness must key off the item index, not the thread.
inline void parallel_for(int n, const std::function<void(int)>& fn) {
    int threads = std::min(worker_thread_cap(), n);
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t]() {
            for (int i = t; i < n; i += threads) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace ctf
