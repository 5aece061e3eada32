#pragma once

// Data-parallel loop drivers. Every parallel kernel in the library has a serial
// reference path selected by ExecutionPolicy::Serial; tests compare the two and
// bench/ times them.

#include <Eigen/Core>

#include <cstddef>
#include <functional>

namespace affstereo {

enum class ExecutionPolicy { Serial, Parallel };

int max_threads();

// body(i) for i in [0, n). Bodies must write only to slot i of their outputs.
void parallel_for(std::size_t n, ExecutionPolicy policy,
                  const std::function<void(std::size_t)>& body);

// Sums per-chunk partial matrices in chunk order. The chunking depends only on
// n and chunk_size, never on the thread count, so the result is bit-identical
// for any number of threads.
Eigen::MatrixXd chunked_accumulate(
    std::size_t n, std::size_t chunk_size, Eigen::Index rows, Eigen::Index cols,
    ExecutionPolicy policy,
    const std::function<void(std::size_t begin, std::size_t end, Eigen::MatrixXd& acc)>& body);

}  // namespace affstereo
