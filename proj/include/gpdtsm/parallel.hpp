#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

#ifdef GPDTSM_HAVE_OPENMP
#include <omp.h>
#endif

namespace gpdtsm {

// Global switch between the OpenMP kernels and the serial reference path.
// Results must be bit-identical either way; test_parallel_determinism checks it.
inline bool& use_parallel() {
#ifdef GPDTSM_HAVE_OPENMP
  static bool enabled = true;
#else
  static bool enabled = false;
#endif
  return enabled;
}

// Exceptions thrown by the body are captured and rethrown on the calling
// thread (an exception escaping an OpenMP region would terminate).
template <typename F>
void parallel_for(std::ptrdiff_t n, F&& body) {
#ifdef GPDTSM_HAVE_OPENMP
  if (use_parallel()) {
    std::exception_ptr err;
    std::mutex err_mutex;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!err) err = std::current_exception();
      }
    }
    if (err) std::rethrow_exception(err);
    return;
  }
#endif
  for (std::ptrdiff_t i = 0; i < n; ++i) body(i);
}

inline int max_threads() {
#ifdef GPDTSM_HAVE_OPENMP
  return use_parallel() ? omp_get_max_threads() : 1;
#else
  return 1;
#endif
}

}  // namespace gpdtsm
