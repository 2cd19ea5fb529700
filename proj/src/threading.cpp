#include "arbkit/threading.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace arbkit {

std::size_t block_count(std::size_t n, std::size_t block) {
    return block == 0 ? 0 : (n + block - 1) / block;
}

void parallel_blocks(std::size_t n, std::size_t block, int threads,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    if (block == 0) throw std::invalid_argument("parallel_blocks: block size must be positive");
    const std::size_t nblocks = block_count(n, block);
    const int nthreads = std::max(1, threads);
    if (nthreads == 1 || nblocks == 1) {
        for (std::size_t b = 0; b < nblocks; ++b)
            fn(b * block, std::min(n, (b + 1) * block), b);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    auto worker = [&]() {
        for (;;) {
            const std::size_t b = next.fetch_add(1);
            if (b >= nblocks || failed.load()) return;
            try {
                fn(b * block, std::min(n, (b + 1) * block), b);
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
                return;
            }
        }
    };
    const int spawn = static_cast<int>(std::min<std::size_t>(nthreads, nblocks));
    pool.reserve(spawn);
    for (int t = 0; t < spawn; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (failed.load() && error) std::rethrow_exception(error);
}

int resolve_threads(int requested) {
    if (requested > 0) return std::min(requested, 64);
    if (const char* env = std::getenv("ARBKIT_THREADS")) {
        try {
            const int v = std::stoi(env);
            if (v > 0) return std::min(v, 64);
        } catch (...) {
            // fall through to hardware default
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return static_cast<int>(std::min(16u, hw == 0 ? 1u : hw));
}

}  // namespace arbkit
