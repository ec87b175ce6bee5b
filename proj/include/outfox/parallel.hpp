#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <future>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

namespace outfox {

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Returns one
// exception_ptr per index (null on success); results are the caller's to
// place by index, so output order never depends on completion order.
template <typename Fn>
std::vector<std::exception_ptr> parallel_for(std::size_t n, int jobs, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  auto run_one = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) run_one(i);
    return errors;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) run_one(i);
    });
  }
  pool.clear();
  return errors;
}

// Rethrows the lowest-index failure, if any.
inline void rethrow_first(const std::vector<std::exception_ptr>& errors) {
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Thread-safe memo that computes each key exactly once. Concurrent callers
// for a key wait on the first, so the number of backend calls does not
// depend on scheduling. Failures are memoized and rethrown to every caller.
template <typename V>
class OnceMap {
 public:
  template <typename Fn>
  V get_or_compute(const std::string& key, Fn&& compute) {
    std::unique_lock lock(mu_);
    if (auto it = map_.find(key); it != map_.end()) {
      auto fut = it->second;
      lock.unlock();
      return fut.get();
    }
    std::promise<V> promise;
    auto fut = promise.get_future().share();
    map_.emplace(key, fut);
    lock.unlock();
    try {
      promise.set_value(compute());
    } catch (...) {
      promise.set_exception(std::current_exception());
    }
    return fut.get();
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return map_.size();
  }

 private:
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::shared_future<V>> map_;
};

}  // namespace outfox
