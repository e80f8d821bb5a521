#pragma once

#include <cstddef>
#include <functional>

namespace nlgpe {

/// Number of worker threads used by parallel_for. Defaults to 1.
void set_thread_count(std::size_t n);
std::size_t thread_count();

/// Runs body(i) for i in [0, n). Work is split into contiguous chunks so each
/// index is handled by exactly one thread; results written per index are
/// therefore independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace nlgpe
