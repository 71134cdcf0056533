#pragma once

#include <cstddef>
#include <functional>

namespace nai {

// Global worker count for row-parallel kernels. Every kernel assigns each
// output row to exactly one worker and accumulates in CSR order, so results
// are bitwise identical for any thread count.
void set_thread_count(int n);
int thread_count();

// Runs body(begin, end) over a partition of [0, n). With thread_count() == 1
// (the default) this is a plain call on the caller's thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

// Restores the previous thread count on destruction.
class ThreadCountGuard {
public:
  explicit ThreadCountGuard(int n) : saved_(thread_count()) { set_thread_count(n); }
  ~ThreadCountGuard() { set_thread_count(saved_); }
  ThreadCountGuard(const ThreadCountGuard&) = delete;
  ThreadCountGuard& operator=(const ThreadCountGuard&) = delete;

private:
  int saved_;
};

} // namespace nai
