#include "gic/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

namespace gic {
namespace {

class Pool {
public:
  static Pool& instance() {
    static Pool pool;
    return pool;
  }

  void resize(int n) {
    if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    std::unique_lock<std::mutex> lk(mu_);
    if (n == workers_wanted_) return;
    stop_workers(lk);
    workers_wanted_ = n;
    start_workers(lk);
  }

  int size() {
    std::unique_lock<std::mutex> lk(mu_);
    return workers_wanted_;
  }

  void run(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
    // One job at a time; concurrent callers (e.g. independent tapes) take turns.
    std::lock_guard<std::mutex> run_lk(run_mu_);
    std::unique_lock<std::mutex> lk(mu_);
    int nthreads = workers_wanted_;
    if (nthreads <= 1 || n < 2) {
      lk.unlock();
      if (n > 0) fn(0, n);
      return;
    }
    std::size_t chunks = std::min<std::size_t>(static_cast<std::size_t>(nthreads), n);
    job_fn_ = &fn;
    job_n_ = n;
    job_chunks_ = chunks;
    next_chunk_.store(0, std::memory_order_relaxed);
    pending_.store(static_cast<int>(chunks), std::memory_order_relaxed);
    ++job_id_;
    cv_.notify_all();
    lk.unlock();

    work_until_done();

    std::unique_lock<std::mutex> lk2(mu_);
    done_cv_.wait(lk2, [this] { return pending_.load(std::memory_order_acquire) == 0; });
    job_fn_ = nullptr;
  }

private:
  Pool() { workers_wanted_ = static_cast<int>(std::thread::hardware_concurrency()); start_workers_unlocked(); }

  ~Pool() {
    std::unique_lock<std::mutex> lk(mu_);
    stop_workers(lk);
  }

  void start_workers(std::unique_lock<std::mutex>&) { start_workers_unlocked(); }

  void start_workers_unlocked() {
    stopping_ = false;
    for (int i = 1; i < workers_wanted_; ++i) {
      threads_.emplace_back([this] { worker_loop(); });
    }
  }

  void stop_workers(std::unique_lock<std::mutex>& lk) {
    stopping_ = true;
    cv_.notify_all();
    lk.unlock();
    for (auto& t : threads_) t.join();
    threads_.clear();
    lk.lock();
  }

  void worker_loop() {
    std::uint64_t seen = 0;
    for (;;) {
      std::unique_lock<std::mutex> lk(mu_);
      cv_.wait(lk, [this, seen] { return stopping_ || job_id_ != seen; });
      if (stopping_) return;
      seen = job_id_;
      lk.unlock();
      work_until_done();
    }
  }

  void work_until_done() {
    for (;;) {
      std::size_t c = next_chunk_.fetch_add(1, std::memory_order_relaxed);
      if (c >= job_chunks_) return;
      std::size_t begin = job_n_ * c / job_chunks_;
      std::size_t end = job_n_ * (c + 1) / job_chunks_;
      if (begin < end) (*job_fn_)(begin, end);
      if (pending_.fetch_sub(1, std::memory_order_acq_rel) == 1) {
        std::lock_guard<std::mutex> lk(mu_);
        done_cv_.notify_all();
      }
    }
  }

  std::mutex run_mu_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  std::vector<std::thread> threads_;
  int workers_wanted_ = 1;
  bool stopping_ = false;
  std::uint64_t job_id_ = 0;
  const std::function<void(std::size_t, std::size_t)>* job_fn_ = nullptr;
  std::size_t job_n_ = 0;
  std::size_t job_chunks_ = 0;
  std::atomic<std::size_t> next_chunk_{0};
  std::atomic<int> pending_{0};
};

} // namespace

void set_thread_count(int n) { Pool::instance().resize(n); }

int thread_count() { return Pool::instance().size(); }

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
  Pool::instance().run(n, fn);
}

} // namespace gic
