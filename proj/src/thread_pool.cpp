#include "tpdm/thread_pool.hpp"

#include <atomic>
#include <condition_variable>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

namespace tpdm {

struct ThreadPool::Impl {
    int threads;
    std::vector<std::thread> workers;

    std::mutex mu;
    std::condition_variable cv_work;
    std::condition_variable cv_done;
    bool shutdown = false;
    std::uint64_t generation = 0;
    int active = 0;

    // Current job: grab fixed-size blocks of [0, n) until exhausted.
    const std::function<void(std::int64_t, std::int64_t)>* body = nullptr;
    std::int64_t n = 0;
    std::int64_t block = 1;
    std::atomic<std::int64_t> next{0};
    std::exception_ptr error;

    void run_blocks() {
        while (true) {
            const std::int64_t begin = next.fetch_add(block);
            if (begin >= n)
                break;
            const std::int64_t end = std::min(begin + block, n);
            try {
                (*body)(begin, end);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!error)
                    error = std::current_exception();
            }
        }
    }

    void worker_loop() {
        std::uint64_t seen = 0;
        while (true) {
            {
                std::unique_lock<std::mutex> lock(mu);
                cv_work.wait(lock, [&] {
                    return shutdown || generation != seen;
                });
                if (shutdown)
                    return;
                seen = generation;
            }
            run_blocks();
            {
                std::lock_guard<std::mutex> lock(mu);
                if (--active == 0)
                    cv_done.notify_all();
            }
        }
    }
};

ThreadPool::ThreadPool(int threads) : impl_(std::make_unique<Impl>()) {
    if (threads < 1)
        throw std::invalid_argument("thread pool size must be >= 1");
    impl_->threads = threads;
    for (int i = 0; i < threads - 1; ++i)
        impl_->workers.emplace_back([this] { impl_->worker_loop(); });
}

ThreadPool::~ThreadPool() {
    {
        std::lock_guard<std::mutex> lock(impl_->mu);
        impl_->shutdown = true;
    }
    impl_->cv_work.notify_all();
    for (auto& w : impl_->workers)
        w.join();
}

int ThreadPool::size() const { return impl_->threads; }

void ThreadPool::parallel_for(
    std::int64_t n,
    const std::function<void(std::int64_t, std::int64_t)>& body) {
    if (n <= 0)
        return;
    Impl& im = *impl_;
    if (im.threads == 1 || n == 1) {
        body(0, n);
        return;
    }
    {
        std::lock_guard<std::mutex> lock(im.mu);
        im.body = &body;
        im.n = n;
        // A few blocks per worker smooths out uneven slice costs.
        im.block = std::max<std::int64_t>(1, n / (4 * im.threads));
        im.next.store(0);
        im.error = nullptr;
        im.active = im.threads - 1;
        ++im.generation;
    }
    im.cv_work.notify_all();
    im.run_blocks();
    {
        std::unique_lock<std::mutex> lock(im.mu);
        im.cv_done.wait(lock, [&] { return im.active == 0; });
        im.body = nullptr;
        if (im.error)
            std::rethrow_exception(im.error);
    }
}

namespace {

std::unique_ptr<ThreadPool>& global_pool_slot() {
    static std::unique_ptr<ThreadPool> pool =
        std::make_unique<ThreadPool>(1);
    return pool;
}

} // namespace

ThreadPool& ThreadPool::global() { return *global_pool_slot(); }

void set_global_threads(int threads) {
    global_pool_slot() = std::make_unique<ThreadPool>(threads);
}

int global_threads() { return ThreadPool::global().size(); }

} // namespace tpdm
