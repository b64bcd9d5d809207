#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace glab {

// Thread cap from GUIDANCE_LAB_THREADS; 0 or unset means hardware auto.
inline int thread_budget() {
    int budget = 0;
    if (const char* env = std::getenv("GUIDANCE_LAB_THREADS")) {
        budget = std::atoi(env);
        if (budget < 0) budget = 0;
    }
    if (budget == 0) {
        budget = static_cast<int>(std::thread::hardware_concurrency());
        if (budget == 0) budget = 1;
    }
    return budget;
}

// Static range partition over [0, n). Work items must be independent;
// determinism comes from each item owning its outputs and any randomness.
inline void parallel_for(int n, const std::function<void(int)>& body) {
    const int threads = std::min(thread_budget(), n);
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            for (int i = t; i < n; i += threads) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace glab
