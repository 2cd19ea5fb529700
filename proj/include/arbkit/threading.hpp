#pragma once

#include <cstddef>
#include <functional>

namespace arbkit {

// Runs fn(begin, end, block_index) over [0, n) split into fixed-size blocks.
// Block boundaries depend only on (n, block), never on the thread count, so
// any reduction keyed by block_index is reproducible across thread counts.
void parallel_blocks(std::size_t n, std::size_t block, int threads,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

std::size_t block_count(std::size_t n, std::size_t block);

// Thread count resolution: explicit argument wins, then ARBKIT_THREADS, then
// hardware concurrency clamped to [1, 16].
int resolve_threads(int requested);

}  // namespace arbkit
