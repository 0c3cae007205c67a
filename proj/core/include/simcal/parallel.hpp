#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace simcal {

/// Evaluates fn(0..count-1) on up to `threads` workers; results are stored by
/// index so the output order never depends on scheduling. The first exception
/// thrown by any task is rethrown after all workers join.
template <class Fn>
auto parallel_map(int count, int threads, Fn fn) -> std::vector<decltype(fn(0))> {
    using Result = decltype(fn(0));
    std::vector<Result> out(static_cast<std::size_t>(std::max(count, 0)));
    if (count <= 0) return out;
    const int workers = std::clamp(threads, 1, count);
    if (workers == 1) {
        for (int k = 0; k < count; ++k) out[static_cast<std::size_t>(k)] = fn(k);
        return out;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int k = next++; k < count; k = next++) {
                try {
                    out[static_cast<std::size_t>(k)] = fn(k);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next = count;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
    return out;
}

/// Hardware concurrency with a floor of one.
inline int default_threads() {
    return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace simcal
