#include "finsler/parallel.hpp"

#include <exception>
#include <limits>

#ifdef FINSLER_HAVE_OPENMP
#include <omp.h>
#endif

namespace finsler {

namespace {
int g_workers = 0;
}

void set_worker_count(int n) { g_workers = n > 0 ? n : 0; }

int worker_count() {
#ifdef FINSLER_HAVE_OPENMP
  return g_workers > 0 ? g_workers : omp_get_max_threads();
#else
  return 1;
#endif
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  std::exception_ptr first;
  std::size_t first_index = std::numeric_limits<std::size_t>::max();
#ifdef FINSLER_HAVE_OPENMP
  const long long count = static_cast<long long>(n);
#pragma omp parallel for schedule(static) num_threads(worker_count())
  for (long long i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(finsler_parallel_for)
      if (static_cast<std::size_t>(i) < first_index) {
        first_index = static_cast<std::size_t>(i);
        first = std::current_exception();
      }
    }
  }
#else
  for (std::size_t i = 0; i < n; ++i) {
    try {
      fn(i);
    } catch (...) {
      first = std::current_exception();
      break;
    }
  }
#endif
  if (first) std::rethrow_exception(first);
}

}  // namespace finsler
