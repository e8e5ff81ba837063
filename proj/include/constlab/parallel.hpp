#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace constlab {

// CONSTLAB_THREADS overrides the hardware default.
inline unsigned default_threads()
{
    if (const char* env = std::getenv("CONSTLAB_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v > 0)
                return static_cast<unsigned>(v);
        } catch (const std::exception&) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// Runs task(chunk) for chunk in [0, chunks) on up to `threads` workers. Chunks are
// claimed dynamically but every result lands in its own slot, so a reduction that
// walks the slots in order is independent of the thread count.
template <class Result, class Task>
std::vector<Result> run_chunks(std::size_t chunks, unsigned threads, Task&& task)
{
    std::vector<Result> out(chunks);
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(chunks, 1))));
    if (threads == 1) {
        for (std::size_t c = 0; c < chunks; ++c)
            out[c] = task(c);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            try {
                for (std::size_t c = next++; c < chunks; c = next++)
                    out[c] = task(c);
            } catch (...) {
                if (!failed.exchange(true))
                    failure = std::current_exception();
                next = chunks;
            }
        });
    }
    for (auto& th : pool)
        th.join();
    if (failure)
        std::rethrow_exception(failure);
    return out;
}

// Splits [0, total) into fixed-size blocks; the block layout depends only on total.
struct ChunkPlan {
    std::uint64_t total = 0;
    std::uint64_t block = 1;

    static ChunkPlan for_total(std::uint64_t total, std::uint64_t max_chunks = 256)
    {
        ChunkPlan p;
        p.total = total;
        p.block = std::max<std::uint64_t>(1, (total + max_chunks - 1) / max_chunks);
        return p;
    }
    std::size_t chunks() const { return static_cast<std::size_t>((total + block - 1) / block); }
    std::uint64_t begin(std::size_t c) const { return c * block; }
    std::uint64_t end(std::size_t c) const { return std::min(total, (c + 1) * block); }
};

} // namespace constlab
