#pragma once

#include <cstddef>
#include <functional>

namespace pcrl {

/// Worker count used by parallel_for. Zero selects std::thread::hardware_concurrency().
void set_thread_count(unsigned count);
unsigned thread_count();

/// Runs body(i) for i in [0, n) on the worker pool size; iterations are claimed in chunks.
/// body must not touch state shared with other iterations unless that state is synchronized.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

} // namespace pcrl
