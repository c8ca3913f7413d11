#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <span>
#include <vector>

namespace roughflow {

// Process-wide worker count used by every node-parallel loop. Defaults to 1.
void set_worker_count(int workers);
int worker_count();

// Runs body(i) for i in [0, n). Results must be written to per-index slots so the
// outcome does not depend on scheduling. The exception from the lowest failing index is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

template <class T, class F>
std::vector<T> parallel_map(std::size_t n, F&& fn) {
  std::vector<T> out(n);
  parallel_for(n, [&](std::size_t i) { out[i] = fn(i); });
  return out;
}

// Pairwise summation in a fixed tree order.
double tree_sum(std::span<const double> values);

}  // namespace roughflow
