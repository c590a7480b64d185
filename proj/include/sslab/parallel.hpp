#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace sslab {

// Worker count from SSLAB_THREADS, else the number of logical cores.
int thread_count();

// Runs body(k) for k in [0, n). Items are split into contiguous blocks, one
// per worker; results must be written to per-index slots so the outcome does
// not depend on the thread count. The first exception thrown is rethrown.
template <class Body>
void parallel_for(std::size_t n, Body&& body, int threads = thread_count()) {
    if (n == 0) return;
    const std::size_t workers =
        std::min<std::size_t>(n, static_cast<std::size_t>(threads < 1 ? 1 : threads));
    if (workers == 1) {
        for (std::size_t k = 0; k < n; ++k) body(k);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) {
        pool.emplace_back([&, t] {
            const std::size_t begin = n * t / workers;
            const std::size_t end = n * (t + 1) / workers;
            try {
                for (std::size_t k = begin; k < end; ++k) body(k);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace sslab
