#pragma once

// A small persistent worker pool with a chunked parallel_for.
//
// Determinism contract: parallel_for callers only write to disjoint
// locations, and any reduction is performed afterwards in a fixed
// sequential order.  Under that discipline the results are bit-identical
// for every thread count, which the samplers rely on.

#include <cstdint>
#include <functional>
#include <memory>

namespace tpdm {

class ThreadPool {
  public:
    explicit ThreadPool(int threads);
    ~ThreadPool();

    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

    int size() const;

    // Invoke body(begin, end) over a partition of [0, n); the calling
    // thread participates.  Chunk boundaries may differ between runs and
    // thread counts — bodies must write disjoint outputs only.
    void parallel_for(std::int64_t n,
                      const std::function<void(std::int64_t, std::int64_t)>&
                          body);

    // Process-wide pool, default 1 thread (everything inline).
    static ThreadPool& global();

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Replace the global pool; call before launching parallel work.
void set_global_threads(int threads);
int global_threads();

} // namespace tpdm
