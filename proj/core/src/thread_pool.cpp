#include "fedstale/thread_pool.hpp"

#include <algorithm>

namespace fedstale {

ThreadPool::ThreadPool(std::size_t threads) {
  const std::size_t extra = threads > 1 ? threads - 1 : 0;
  workers_.reserve(extra);
  for (std::size_t k = 0; k < extra; ++k) workers_.emplace_back([this] { worker_loop(); });
}

ThreadPool::~ThreadPool() {
  {
    std::lock_guard lock(mu_);
    stop_ = true;
  }
  wake_.notify_all();
  for (auto& t : workers_) t.join();
}

// Claims indices until the current job is exhausted.
void ThreadPool::drain(std::unique_lock<std::mutex>& lock) {
  while (job_ != nullptr && next_index_ < job_size_) {
    const std::size_t i = next_index_++;
    const auto* fn = job_;
    ++busy_;
    lock.unlock();
    std::exception_ptr err;
    try {
      (*fn)(i);
    } catch (...) {
      err = std::current_exception();
    }
    lock.lock();
    if (err) errors_[i] = err;
    --busy_;
  }
  if (busy_ == 0) done_.notify_all();
}

void ThreadPool::worker_loop() {
  std::unique_lock lock(mu_);
  std::uint64_t seen = generation_;
  while (true) {
    wake_.wait(lock, [&] { return stop_ || generation_ != seen; });
    if (stop_) return;
    seen = generation_;
    drain(lock);
  }
}

void ThreadPool::parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  if (workers_.empty()) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::unique_lock lock(mu_);
  job_ = &fn;
  job_size_ = n;
  next_index_ = 0;
  busy_ = 0;
  errors_.assign(n, nullptr);
  ++generation_;
  wake_.notify_all();
  drain(lock);
  done_.wait(lock, [&] { return next_index_ >= job_size_ && busy_ == 0; });
  job_ = nullptr;
  std::exception_ptr first;
  for (auto& e : errors_) {
    if (e) {
      first = e;
      break;
    }
  }
  errors_.clear();
  if (first) std::rethrow_exception(first);
}

std::size_t default_thread_count() {
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

}  // namespace fedstale
