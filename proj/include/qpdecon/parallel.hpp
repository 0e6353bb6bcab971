#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace qpdecon {

//! Runs body(i) for i in [0, count) on up to `threads` workers. Work is
//! handed out by index so results written to slot i are order independent.
//! The first exception thrown by any call is rethrown after all workers join.
template <class Body>
void parallel_for(int count, int threads, Body&& body)
{
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i)
      body(i);
    return;
  }
  std::atomic<int> next{ 0 };
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= count)
        return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure)
          failure = std::current_exception();
        next.store(count);
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t)
    pool.emplace_back(worker);
  for (auto& t : pool)
    t.join();
  if (failure)
    std::rethrow_exception(failure);
}

//! Hardware concurrency, at least 1.
inline int default_thread_count()
{
  return std::max(1u, std::thread::hardware_concurrency());
}

} // namespace qpdecon
