#include "volskin/common.hpp"

#include <cstdio>
#include <cstdlib>
#include <thread>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace volskin {

const char* revision() {
#ifdef VOLSKIN_REVISION
  return VOLSKIN_REVISION;
#else
  return "unknown";
#endif
}

int thread_count() {
  if (const char* env = std::getenv("RECON_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void apply_thread_env() {
#ifdef _OPENMP
  omp_set_num_threads(thread_count());
#endif
}

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

}  // namespace volskin
