#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace chronodivide {

/// Runs index-addressed tasks on a fixed number of threads. Tasks write into
/// their own result slot, so output never depends on scheduling.
class Executor {
 public:
  /// threads == 0 selects the hardware concurrency.
  explicit Executor(std::size_t threads = 1)
      : threads_(threads == 0 ? std::max<std::size_t>(1, std::thread::hardware_concurrency())
                              : threads) {}

  std::size_t threads() const noexcept { return threads_; }

  /// Calls fn(i) for every i in [0, count). The exception of the lowest
  /// failing index is rethrown after all workers stop.
  template <typename Fn>
  void for_each_index(std::size_t count, Fn&& fn) const {
    const std::size_t workers = std::min(threads_, count);
    if (workers <= 1) {
      for (std::size_t i = 0; i < count; ++i) fn(i);
      return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex error_mutex;
    std::size_t error_index = count;
    std::exception_ptr error;
    auto work = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count || failed.load()) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (i < error_index) {
            error_index = i;
            error = std::current_exception();
          }
          failed.store(true);
        }
      }
    };
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(work);
    work();
    pool.clear();
    if (error) std::rethrow_exception(error);
  }

 private:
  std::size_t threads_;
};

}  // namespace chronodivide
