#include "roughflow/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>

#include "roughflow/error.hpp"

namespace roughflow {

namespace {
std::atomic<int> g_workers{1};
}

void set_worker_count(int workers) {
  if (workers < 1) fail(ErrorCode::InvalidParam, "worker count must be >= 1");
  g_workers.store(workers);
}

int worker_count() { return g_workers.load(); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(worker_count()), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::size_t error_index = n;
  std::exception_ptr error;
  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (i < error_index) {
          error_index = i;
          error = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(run);
  run();
  for (auto& th : threads) th.join();
  if (error) std::rethrow_exception(error);
}

double tree_sum(std::span<const double> values) {
  if (values.empty()) return 0.0;
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return tree_sum(values.first(half)) + tree_sum(values.subspan(half));
}

}  // namespace roughflow
