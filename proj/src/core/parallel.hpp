#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace needscope {

// Global worker cap. 0 means "use hardware concurrency".
void set_thread_limit(unsigned threads);
unsigned thread_limit();

// Runs fn(i) for i in [0, count) on up to thread_limit() workers. Tasks are
// claimed in index order; the first exception thrown is rethrown after all
// workers join.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace needscope
