#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace swjd {

/// Worker count used by estimators. 0 selects the available hardware parallelism.
void set_thread_count(int n);
int thread_count();

/// Runs body(i) for i in [0, n) across the worker pool. Each index is visited
/// exactly once; the result of a run never depends on how indices are split.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// Pairwise summation in index order; bit-identical for a given input order.
double pairwise_sum(std::span<const double> values);

template <class T, class F>
std::vector<T> parallel_map(std::size_t n, F&& fn) {
  std::vector<T> out(n);
  parallel_for(n, [&](std::size_t i) { out[i] = fn(i); });
  return out;
}

}  // namespace swjd
