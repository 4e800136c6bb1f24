#pragma once

#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

#include <algorithm>
#include <cstddef>
#include <thread>

namespace glut {

/// Worker count used when a caller passes 0.
inline int default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

/// Runs fn(chunk) for every chunk index in [0, chunks) on up to `threads` workers. Chunk boundaries
/// are chosen by the caller, so any per-chunk partial results combined in chunk order are
/// independent of the worker count.
template <typename Fn>
void parallel_chunks(std::size_t chunks, int threads, Fn&& fn) {
    if (chunks == 0) return;
    if (threads <= 0) threads = default_threads();
    if (threads == 1 || chunks == 1) {
        for (std::size_t c = 0; c < chunks; ++c) fn(c);
        return;
    }
    tbb::task_arena arena(threads);
    arena.execute([&] {
        tbb::parallel_for(std::size_t{0}, chunks, [&](std::size_t c) { fn(c); });
    });
}

/// Number of fixed-size chunks covering n items.
inline std::size_t chunk_count(std::size_t n, std::size_t chunk) { return (n + chunk - 1) / chunk; }

}  // namespace glut
