#pragma once

#include <cstddef>
#include <exception>
#include <vector>

#ifdef EAFPCA_HAVE_OPENMP
#include <omp.h>
#endif

namespace eafpca {

// Number of worker threads used by parallel_for; 0 keeps the OpenMP default.
void set_num_threads(int n);
int num_threads();

// Runs body(i) for i in [0, n). Iterations must not share mutable state.
// If several iterations throw, the exception of the lowest index is rethrown,
// so failures are reported identically for any thread count.
template <typename Body>
void parallel_for(std::ptrdiff_t n, Body&& body) {
  std::vector<std::exception_ptr> errors;
  bool failed = false;
#ifdef EAFPCA_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic, 1) num_threads(num_threads())
#endif
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
#ifdef EAFPCA_HAVE_OPENMP
#pragma omp critical(eafpca_parallel_for)
#endif
      {
        if (errors.empty()) errors.resize(static_cast<std::size_t>(n));
        errors[static_cast<std::size_t>(i)] = std::current_exception();
        failed = true;
      }
    }
  }
  if (failed)
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
}

}  // namespace eafpca
