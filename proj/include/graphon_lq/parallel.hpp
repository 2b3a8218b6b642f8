// ---------------------------------------------------------------------------
// parallel.hpp
//
// Minimal deterministic work-sharing: split an index range into contiguous
// chunks, one per worker thread. Every computation in this suite writes to
// disjoint output slots (per-player columns, per-mode rows) or reduces with a
// fixed merge order after joining, so results are independent of the worker
// count — parallelism is a throughput knob, never a semantics knob.
// ---------------------------------------------------------------------------
#pragma once

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace glq {

// Worker count resolution: explicit request > GRAPHON_LQ_THREADS > hardware.
inline int resolve_thread_count(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("GRAPHON_LQ_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Run body(i) for i in [0, count) on up to `threads` workers (contiguous
// chunks). body must not throw; it writes only to slots owned by index i.
template <class Body>
void parallel_for(int count, int threads, Body&& body) {
    const int workers = std::max(1, std::min(threads, count));
    if (workers == 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    const int chunk = (count + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const int begin = w * chunk;
        const int end = std::min(count, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([begin, end, &body] {
            for (int i = begin; i < end; ++i) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace glq
