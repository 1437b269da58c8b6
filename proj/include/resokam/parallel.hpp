#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <thread>
#include <vector>

namespace resokam {

/// Default worker count: RESOKAM_THREADS if set, else 1.
inline int default_threads()
{
    if (const char* env = std::getenv("RESOKAM_THREADS")) {
        const int t = std::atoi(env);
        if (t > 0)
            return t;
    }
    return 1;
}

/// Calls fn(i) for i in [0, count) on `threads` workers with a static
/// contiguous partition. fn must write only to slot i of its outputs, so the
/// result never depends on the thread count. The first exception (lowest
/// index) is rethrown after all workers join.
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn)
{
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), count);
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = count * w / workers;
        const std::size_t end = count * (w + 1) / workers;
        pool.emplace_back([&, w, begin, end] {
            for (std::size_t i = begin; i < end; ++i) {
                try {
                    fn(i);
                } catch (...) {
                    errors[w] = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool)
        t.join();
    for (std::size_t w = 0; w < workers; ++w)
        if (errors[w])
            std::rethrow_exception(errors[w]);
}

} // namespace resokam
