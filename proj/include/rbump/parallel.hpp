#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace rbump {

/// Worker cap for child tasks; honors RADIAL_BUMP_THREADS when set.
inline int thread_cap() {
  int cap = static_cast<int>(std::thread::hardware_concurrency());
  if (cap < 1) cap = 1;
  if (const char* env = std::getenv("RADIAL_BUMP_THREADS")) {
    const int requested = std::atoi(env);
    if (requested >= 1) cap = std::min(cap, requested);
  }
  return cap;
}

/// Runs fn(0..count-1) on up to thread_cap() workers. Tasks must be
/// independent; results should be written to caller-owned slots by index.
/// The first exception thrown by a task is rethrown after all workers join.
template <typename Fn>
void parallel_for(int count, Fn&& fn) {
  const int workers = std::min(count, thread_cap());
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w]() {
      try {
        for (int i = w; i < count; i += workers) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace rbump
