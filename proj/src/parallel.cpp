#include "eafpca/parallel.hpp"

#include <atomic>

namespace eafpca {

namespace {
std::atomic<int> g_threads{0};
}

void set_num_threads(int n) { g_threads = n < 0 ? 0 : n; }

int num_threads() {
  const int n = g_threads.load();
  if (n > 0) return n;
#ifdef EAFPCA_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace eafpca
