#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace mgms {

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Every index is
/// attempted; the exception of the lowest failing index is rethrown.
template<typename Fn>
void parallel_for(int n, int workers, Fn&& fn)
{
    std::vector<std::exception_ptr> errors(n);
    std::atomic<int> next{0};
    auto work = [&] {
        for (int i; (i = next.fetch_add(1)) < n;) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int threads = std::max(1, std::min(workers, n));
    if (threads == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(work);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace mgms
