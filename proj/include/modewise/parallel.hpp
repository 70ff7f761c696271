#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace modewise {

/// Evaluates fn(i) for i in [0, n) on up to `jobs` threads and returns the
/// results in index order, so output never depends on the worker count.
/// The first exception thrown by any task is rethrown on the caller.
template <typename R>
std::vector<R> parallel_map(std::size_t n, std::size_t jobs,
                            const std::function<R(std::size_t)>& fn) {
  std::vector<R> out(n);
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::atomic<std::size_t> cursor{0};
  std::vector<std::exception_ptr> errors(n);
  auto worker = [&] {
    for (std::size_t i = cursor++; i < n; i = cursor++) {
      try {
        out[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t count = jobs < n ? jobs : n;
  pool.reserve(count);
  for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace modewise
