#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace relearn {

// Runs f(i) for i in [0, n) on up to n_threads workers with a static
// partition. Each i must write only to its own output slot; callers reduce
// afterwards in index order, which keeps results byte-identical regardless
// of thread count.
template <class F>
void parallel_for(int n, int n_threads, F&& f) {
    if (n <= 0) return;
    if (n_threads <= 1 || n == 1) {
        for (int i = 0; i < n; ++i) f(i);
        return;
    }
    int workers = std::min(n_threads, n);
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    auto run = [&](int w) {
        for (int i = w; i < n; i += workers) f(i);
    };
    for (int w = 1; w < workers; ++w) pool.emplace_back(run, w);
    run(0);
    for (auto& t : pool) t.join();
}

inline int default_threads() {
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace relearn
