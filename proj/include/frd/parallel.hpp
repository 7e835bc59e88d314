#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace frd {

// Runs body(i) for i in [0, count) on up to `workers` threads. Callers write results into
// per-index slots so the outcome does not depend on scheduling. The first exception is rethrown.
template <class Body>
void parallel_for(std::uint64_t count, int workers, Body&& body) {
    const int n = static_cast<int>(std::min<std::uint64_t>(std::max(workers, 1), std::max<std::uint64_t>(count, 1)));
    if (n <= 1) {
        for (std::uint64_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr error;
    std::mutex mu;
    auto run = [&] {
        for (std::uint64_t i; (i = next.fetch_add(1)) < count;) {
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!error) error = std::current_exception();
                next = count;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int k = 0; k < n; ++k) pool.emplace_back(run);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace frd
