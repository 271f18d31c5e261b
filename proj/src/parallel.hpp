#pragma once

#include <cstddef>
#include <exception>
#include <vector>

namespace hmf::detail {

// `#pragma omp parallel for` over [0, n) that carries exceptions out of the
// parallel region. The exception from the lowest index wins.
template <class Body>
void parallel_for(std::ptrdiff_t n, Body body) {
  std::ptrdiff_t first_bad = n;
  std::exception_ptr error;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
#pragma omp critical(hmf_parallel_for_error)
      if (i < first_bad) {
        first_bad = i;
        error = std::current_exception();
      }
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace hmf::detail
