#pragma once
// Index-addressed bounded fan-out. Each slot is written by exactly one
// worker, so results stay ordered and deterministic regardless of scheduling.

#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace bimem::detail {

template <typename Fn>
void parallel_for(std::size_t count, int max_workers, Fn&& fn) {
    int workers = max_workers;
    if (workers < 1) workers = 1;
    if (static_cast<std::size_t>(workers) > count) workers = static_cast<int>(count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (std::thread& t : pool) t.join();
    for (const std::exception_ptr& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace bimem::detail
