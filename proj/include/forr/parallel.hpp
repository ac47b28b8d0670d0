#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace forr {

// Static split; work items must be independent. Determinism comes from
// per-index rng streams, never from scheduling.
inline void parallel_for(int jobs, size_t count, const std::function<void(size_t)>& fn) {
    if (jobs <= 1 || count < 2) {
        for (size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    size_t workers = std::min<size_t>(jobs, count);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w]() {
            for (size_t i = w; i < count; i += workers) fn(i);
        });
    for (auto& t : pool) t.join();
}

inline int default_jobs() {
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? int(hw) : 1;
}

}  // namespace forr
