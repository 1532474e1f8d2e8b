#include "slowfast/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace slowfast {

namespace {

std::atomic<int> g_max_threads{0};
thread_local bool t_in_parallel = false;

}  // namespace

void set_max_threads(int n) { g_max_threads.store(std::max(0, n)); }

int max_threads() {
  const int n = g_max_threads.load();
  if (n > 0) return n;
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t workers = t_in_parallel ? 1 : std::min<std::size_t>(n, static_cast<std::size_t>(max_threads()));
  if (workers <= 1) {
    const bool outer = t_in_parallel;
    t_in_parallel = true;
    try {
      for (std::size_t i = 0; i < n; ++i) fn(i);
    } catch (...) {
      t_in_parallel = outer;
      throw;
    }
    t_in_parallel = outer;
    return;
  }

  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::size_t err_index = n;
  std::exception_ptr err;
  auto work = [&] {
    t_in_parallel = true;
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) break;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (i < err_index) {
          err_index = i;
          err = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  const bool outer = t_in_parallel;
  work();
  t_in_parallel = outer;
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace slowfast
