#pragma once

#include <omp.h>

#include <algorithm>

namespace mpmsim {

/// Sets the worker count used by every parallel loop in the library.
inline void set_thread_count(int threads) { omp_set_num_threads(std::max(1, threads)); }

inline int thread_count() { return omp_get_max_threads(); }

/// Relaxed atomic accumulation into a double shared between threads.
inline void atomic_add(double& target, double value) noexcept {
#pragma omp atomic update
  target += value;
}

}  // namespace mpmsim
