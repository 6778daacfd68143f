#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace pnc {

/// Process-wide default worker count; 0 means hardware concurrency.
inline std::atomic<int>& default_threads() {
    static std::atomic<int> value{0};
    return value;
}

inline int resolve_threads(int requested) {
    int n = requested > 0 ? requested : default_threads().load();
    if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
    return std::max(1, n);
}

/// Runs body(i) for i in [0, count). Results must be written to
/// index-addressed slots so ordering stays deterministic. The first
/// exception (lowest index) is rethrown after all workers join.
template <typename Body>
void parallel_for(int count, int threads, Body&& body) {
    const int workers = std::min(resolve_threads(threads), std::max(1, count));
    if (workers <= 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::mutex guard;
    int failed_index = count;
    std::exception_ptr failure;
    auto run = [&] {
        for (int i = next++; i < count; i = next++) {
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(guard);
                if (i < failed_index) {
                    failed_index = i;
                    failure = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

} // namespace pnc
