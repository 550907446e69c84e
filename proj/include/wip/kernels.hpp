#pragma once

// Compute kernels used by the network. Every kernel has an OpenMP-parallel
// implementation (namespace wip::kernels) and a plain serial reference
// (namespace wip::kernels::serial) kept for testing and benchmarking.
//
// All matrices are row-major. Results of the parallel kernels do not depend
// on the thread count: every output element is produced by exactly one thread
// with a fixed accumulation order.

#include <cstddef>
#include <cstdint>
#include <span>

namespace wip::kernels {

enum class Trans { No, Yes };

// C = alpha * op(A) * op(B) + beta * C, op(A) is m x k, op(B) is k x n.
// beta == 0 overwrites C without reading it.
template <typename T>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          T alpha, const T* a, std::size_t lda, const T* b, std::size_t ldb,
          T beta, T* c, std::size_t ldc);

// k nearest neighbours inside independent groups of points.
// `features` holds n_groups * group_size rows of `dim` values; for every row
// the indices (local to its group) of its k nearest other rows by Euclidean
// distance are written to `out` (n_groups * group_size * k entries), ordered
// by increasing distance with ties broken by lower index. Self is excluded.
template <typename T>
void knn_groups(const T* features, std::size_t n_groups, std::size_t group_size,
                std::size_t dim, std::size_t k, std::span<std::int32_t> out);

// Number of threads the parallel kernels will use.
int max_threads();

namespace serial {

template <typename T>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          T alpha, const T* a, std::size_t lda, const T* b, std::size_t ldb,
          T beta, T* c, std::size_t ldc);

template <typename T>
void knn_groups(const T* features, std::size_t n_groups, std::size_t group_size,
                std::size_t dim, std::size_t k, std::span<std::int32_t> out);

}  // namespace serial
}  // namespace wip::kernels
