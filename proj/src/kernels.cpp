#include "affstereo/kernels.hpp"

#include <omp.h>

#include <exception>
#include <vector>

namespace affstereo {

int max_threads() { return omp_get_max_threads(); }

void parallel_for(std::size_t n, ExecutionPolicy policy,
                  const std::function<void(std::size_t)>& body) {
  if (policy == ExecutionPolicy::Serial || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  // Exceptions cannot cross the OpenMP region; keep the one from the lowest index.
  std::exception_ptr first_error;
  std::size_t first_index = n;
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(affstereo_parallel_for_error)
      {
        if (static_cast<std::size_t>(i) < first_index) {
          first_index = static_cast<std::size_t>(i);
          first_error = std::current_exception();
        }
      }
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

Eigen::MatrixXd chunked_accumulate(
    std::size_t n, std::size_t chunk_size, Eigen::Index rows, Eigen::Index cols,
    ExecutionPolicy policy,
    const std::function<void(std::size_t, std::size_t, Eigen::MatrixXd&)>& body) {
  if (chunk_size == 0) chunk_size = 1;
  const std::size_t chunks = (n + chunk_size - 1) / chunk_size;
  std::vector<Eigen::MatrixXd> partial(chunks);
  parallel_for(chunks, policy, [&](std::size_t c) {
    partial[c] = Eigen::MatrixXd::Zero(rows, cols);
    const std::size_t begin = c * chunk_size;
    const std::size_t end = std::min(n, begin + chunk_size);
    body(begin, end, partial[c]);
  });
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(rows, cols);
  for (const auto& p : partial) total += p;
  return total;
}

}  // namespace affstereo
