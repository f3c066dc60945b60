#include "cpmmd/parallel.hpp"

#include <omp.h>

namespace cpmmd {

void set_thread_count(int threads) {
  if (threads >= 1) omp_set_num_threads(threads);
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace cpmmd
