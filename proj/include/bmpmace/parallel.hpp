#pragma once

#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace bmpmace {

/// Name of the environment variable selecting the worker count.
inline constexpr const char* kThreadsEnv = "BMPMACE_NUM_THREADS";

/// Worker count: BMPMACE_NUM_THREADS if set to a positive integer, otherwise hardware concurrency.
inline int thread_count() {
  if (const char* env = std::getenv(kThreadsEnv)) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n > 0) return static_cast<int>(n);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

/// Runs body(j) for j in [0, n). Iterations must write disjoint outputs.
/// The first exception thrown by any iteration is rethrown on the caller.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
#ifdef _OPENMP
  const long count = static_cast<long>(n);
  std::exception_ptr error;
  std::mutex error_mutex;
#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (long j = 0; j < count; ++j) {
    try {
      body(static_cast<std::size_t>(j));
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
#else
  for (std::size_t j = 0; j < n; ++j) body(j);
#endif
}

}  // namespace bmpmace
