#pragma once

#include <cstdint>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace nearcrit {

// Worker-pool size: NEARCRIT_THREADS bounds it, hardware concurrency is the
// default. Aggregation in all callers is a deterministic merge by index, so
// results do not depend on scheduling.
inline unsigned thread_count() {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (const char* env = std::getenv("NEARCRIT_THREADS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v >= 1 && v <= 1024) return static_cast<unsigned>(v);
    }
    return hw;
}

// Static partition of [0, n) into contiguous chunks, one worker per chunk.
// fn(chunk_index, begin, end) must only write chunk-local state.
template <typename Fn>
void parallel_chunks(std::uint64_t n, Fn&& fn, unsigned max_threads = 0) {
    unsigned t = max_threads ? max_threads : thread_count();
    if (t > n) t = static_cast<unsigned>(n ? n : 1);
    if (t <= 1) {
        fn(0u, std::uint64_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(t);
    std::uint64_t chunk = (n + t - 1) / t;
    for (unsigned i = 0; i < t; ++i) {
        std::uint64_t b = i * chunk;
        std::uint64_t e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&, i, b, e] { fn(i, b, e); });
    }
    for (auto& th : pool) th.join();
}

}  // namespace nearcrit
