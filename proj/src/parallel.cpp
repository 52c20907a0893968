#include "freenoise/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace freenoise {

namespace {

int initial_threads() {
  if (const char* env = std::getenv("FREENOISE_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

std::atomic<int> g_max_threads{0};

}  // namespace

int max_threads() {
  int n = g_max_threads.load(std::memory_order_relaxed);
  if (n == 0) {
    n = initial_threads();
    g_max_threads.store(n, std::memory_order_relaxed);
  }
  return n;
}

void set_max_threads(int n) {
  g_max_threads.store(n < 1 ? 1 : n, std::memory_order_relaxed);
}

void parallel_for(int n, const std::function<void(int)>& fn) {
  const int workers = std::min(max_threads(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    const int begin = static_cast<int>(static_cast<long long>(n) * w / workers);
    const int end = static_cast<int>(static_cast<long long>(n) * (w + 1) / workers);
    pool.emplace_back([begin, end, &fn] {
      for (int i = begin; i < end; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace freenoise
