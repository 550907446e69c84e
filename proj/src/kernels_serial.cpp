#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "wip/kernels.hpp"

namespace wip::kernels::serial {

template <typename T>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          T alpha, const T* a, std::size_t lda, const T* b, std::size_t ldb,
          T beta, T* c, std::size_t ldc) {
  auto at = [&](std::size_t i, std::size_t p) {
    return ta == Trans::No ? a[i * lda + p] : a[p * lda + i];
  };
  auto bt = [&](std::size_t p, std::size_t j) {
    return tb == Trans::No ? b[p * ldb + j] : b[j * ldb + p];
  };
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T sum = 0;
      for (std::size_t p = 0; p < k; ++p) sum += at(i, p) * bt(p, j);
      T& out = c[i * ldc + j];
      out = alpha * sum + (beta == T{0} ? T{0} : beta * out);
    }
  }
}

template <typename T>
void knn_groups(const T* features, std::size_t n_groups, std::size_t group_size,
                std::size_t dim, std::size_t k, std::span<std::int32_t> out) {
  if (k >= group_size) {
    throw std::invalid_argument("knn_groups: k must be smaller than group size");
  }
  if (out.size() != n_groups * group_size * k) {
    throw std::invalid_argument("knn_groups: output size mismatch");
  }
  for (std::size_t g = 0; g < n_groups; ++g) {
    const T* base = features + g * group_size * dim;
    for (std::size_t i = 0; i < group_size; ++i) {
      std::vector<std::pair<T, std::int32_t>> cand;
      for (std::size_t j = 0; j < group_size; ++j) {
        if (j == i) continue;
        // Same operand order as the parallel kernel so ties agree bitwise.
        const std::size_t lo = std::min(i, j), hi = std::max(i, j);
        T d = 0;
        for (std::size_t c = 0; c < dim; ++c) {
          const T diff = base[hi * dim + c] - base[lo * dim + c];
          d += diff * diff;
        }
        cand.emplace_back(d, static_cast<std::int32_t>(j));
      }
      std::sort(cand.begin(), cand.end());
      for (std::size_t q = 0; q < k; ++q)
        out[(g * group_size + i) * k + q] = cand[q].second;
    }
  }
}

template void gemm<float>(Trans, Trans, std::size_t, std::size_t, std::size_t,
                          float, const float*, std::size_t, const float*,
                          std::size_t, float, float*, std::size_t);
template void gemm<double>(Trans, Trans, std::size_t, std::size_t, std::size_t,
                           double, const double*, std::size_t, const double*,
                           std::size_t, double, double*, std::size_t);
template void knn_groups<float>(const float*, std::size_t, std::size_t,
                                std::size_t, std::size_t,
                                std::span<std::int32_t>);
template void knn_groups<double>(const double*, std::size_t, std::size_t,
                                 std::size_t, std::size_t,
                                 std::span<std::int32_t>);

}  // namespace wip::kernels::serial
