#pragma once

#include <cstddef>
#include <exception>
#include <mutex>
#include <vector>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace recsim {

// Execution policy for the data-parallel kernels. Every kernel has a serial
// path that produces bit-identical results to the OpenMP path; tests compare
// the two and benchmarks time them.
enum class Exec { serial, openmp };

inline Exec default_exec() {
#if defined(_OPENMP)
  return Exec::openmp;
#else
  return Exec::serial;
#endif
}

inline int hardware_threads() {
#if defined(_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// Index-parallel loop. The body must write only to its own index slot so the
// result does not depend on the schedule. The first exception thrown by any
// iteration is rethrown after the loop completes.
template <typename F>
void parallel_for(Exec exec, std::size_t n, F&& body) {
  if (exec == Exec::openmp) {
#if defined(_OPENMP)
    std::exception_ptr error;
    std::mutex error_mutex;
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
      try {
        body(static_cast<std::size_t>(i));
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
    if (error) std::rethrow_exception(error);
    return;
#endif
  }
  for (std::size_t i = 0; i < n; ++i) body(i);
}

// Kahan-compensated sum over a fixed index order; used after parallel fills
// so aggregates do not depend on thread count.
inline double compensated_sum(const std::vector<double>& values) {
  double sum = 0.0, carry = 0.0;
  for (double v : values) {
    double y = v - carry;
    double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  return sum;
}

inline double compensated_mean(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  return compensated_sum(values) / static_cast<double>(values.size());
}

}  // namespace recsim
