#include "hsplat/threading.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

namespace hsplat {
namespace {

using Fn = std::function<void(std::int64_t, std::int64_t)>;

int hardware_threads() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

// Persistent worker pool. One job at a time; the caller participates, so a
// pool of size k serves thread_count = k + 1.
class Pool {
public:
  static Pool& instance() {
    static Pool p;
    return p;
  }

  void resize(int workers) {
    std::unique_lock lk(control_);
    if (workers == static_cast<int>(threads_.size())) return;
    shutdown_locked();
    stop_ = false;
    threads_.reserve(workers);
    for (int i = 0; i < workers; ++i) threads_.emplace_back([this] { worker_loop(); });
  }

  int workers() {
    std::unique_lock lk(control_);
    return static_cast<int>(threads_.size());
  }

  void run(std::int64_t begin, std::int64_t end, std::int64_t grain, const Fn& fn) {
    std::unique_lock control(control_);
    {
      std::lock_guard lk(m_);
      fn_ = &fn;
      end_ = end;
      grain_ = grain;
      cursor_.store(begin, std::memory_order_relaxed);
      remaining_.store(static_cast<int>(threads_.size()), std::memory_order_relaxed);
      ++generation_;
    }
    cv_work_.notify_all();
    drain();
    std::unique_lock lk(m_);
    cv_done_.wait(lk, [this] { return remaining_.load() == 0; });
    fn_ = nullptr;
  }

  ~Pool() {
    std::unique_lock lk(control_);
    shutdown_locked();
  }

private:
  void shutdown_locked() {
    {
      std::lock_guard lk(m_);
      stop_ = true;
    }
    cv_work_.notify_all();
    for (auto& t : threads_) t.join();
    threads_.clear();
  }

  void drain() {
    for (;;) {
      std::int64_t b = cursor_.fetch_add(grain_);
      if (b >= end_) return;
      (*fn_)(b, std::min(b + grain_, end_));
    }
  }

  void worker_loop() {
    std::uint64_t seen = 0;
    for (;;) {
      {
        std::unique_lock lk(m_);
        cv_work_.wait(lk, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
      }
      drain();
      if (remaining_.fetch_sub(1) == 1) {
        std::lock_guard lk(m_);
        cv_done_.notify_all();
      }
    }
  }

  std::mutex control_; // serializes run/resize; parallel_for is not reentrant
  std::vector<std::thread> threads_;

  std::mutex m_;
  std::condition_variable cv_work_, cv_done_;
  std::uint64_t generation_ = 0;
  bool stop_ = false;

  const Fn* fn_ = nullptr;
  std::int64_t end_ = 0, grain_ = 1;
  std::atomic<std::int64_t> cursor_{0};
  std::atomic<int> remaining_{0};
};

std::atomic<int> g_thread_count{0};

} // namespace

void set_thread_count(int n) {
  if (n <= 0) n = hardware_threads();
  g_thread_count.store(n);
  Pool::instance().resize(n - 1);
}

int thread_count() {
  int n = g_thread_count.load();
  return n > 0 ? n : hardware_threads();
}

void parallel_for(std::int64_t begin, std::int64_t end, const Fn& fn) {
  if (end <= begin) return;
  std::int64_t n = end - begin;
  int threads = thread_count();
  if (threads <= 1 || n == 1) {
    fn(begin, end);
    return;
  }
  Pool::instance().resize(threads - 1);
  // Chunk layout depends only on the range so work splits identically at any
  // pool size; writes into shared outputs must be chunk-disjoint.
  std::int64_t grain = std::max<std::int64_t>(1, (n + 63) / 64);
  Pool::instance().run(begin, end, grain, fn);
}

} // namespace hsplat
