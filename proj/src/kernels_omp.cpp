#include "wip/kernels.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <stdexcept>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace wip::kernels {
namespace {

template <typename T>
struct VecOf {
  typedef T type __attribute__((vector_size(64)));
};

// Register tile: kMr rows by kNv SIMD vectors of C.
constexpr int kMr = 6;
constexpr int kNv = 2;
constexpr std::size_t kBlockK = 256;
constexpr std::size_t kRowChunk = 120;

template <typename T>
std::vector<T> transpose_copy(const T* src, std::size_t rows, std::size_t cols,
                              std::size_t ld) {
  // src is rows x cols with leading dimension ld; result is cols x rows.
  std::vector<T> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* s = src + r * ld;
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = s[c];
  }
  return out;
}

// acc[MR][NV] += A[MR x kc] * B[kc x NV*W], then C += alpha * acc.
template <typename T, int MR, int NV>
inline void micro_kernel(std::size_t kc, const T* a, std::size_t lda,
                         const T* b, std::size_t ldb, T* c, std::size_t ldc,
                         T alpha) {
  using V = typename VecOf<T>::type;
  constexpr std::size_t W = sizeof(V) / sizeof(T);
  V acc[MR][NV];
  for (int r = 0; r < MR; ++r)
    for (int v = 0; v < NV; ++v) acc[r][v] = V{};
  for (std::size_t p = 0; p < kc; ++p) {
    V bv[NV];
    for (int v = 0; v < NV; ++v)
      __builtin_memcpy(&bv[v], b + p * ldb + v * W, sizeof(V));
    for (int r = 0; r < MR; ++r) {
      const T av = a[r * lda + p];
      for (int v = 0; v < NV; ++v) acc[r][v] += av * bv[v];
    }
  }
  for (int r = 0; r < MR; ++r) {
    for (int v = 0; v < NV; ++v) {
      V cv;
      __builtin_memcpy(&cv, c + r * ldc + v * W, sizeof(V));
      cv += alpha * acc[r][v];
      __builtin_memcpy(c + r * ldc + v * W, &cv, sizeof(V));
    }
  }
}

template <typename T, int MR>
inline void scalar_tail(std::size_t kc, const T* a, std::size_t lda, const T* b,
                        std::size_t ldb, T* c, std::size_t ldc, T alpha,
                        std::size_t j0, std::size_t j1) {
  for (std::size_t j = j0; j < j1; ++j) {
    T acc[MR] = {};
    for (std::size_t p = 0; p < kc; ++p) {
      const T bj = b[p * ldb + j];
      for (int r = 0; r < MR; ++r) acc[r] += a[r * lda + p] * bj;
    }
    for (int r = 0; r < MR; ++r) c[r * ldc + j] += alpha * acc[r];
  }
}

// Rows [r0, r1) of C += alpha * A * B for one k-block. The column loop is
// outermost so the kc x kNv*W panel of B stays in L1 across the row sweep.
template <typename T>
void panel(std::size_t kc, const T* a, std::size_t lda, const T* b,
           std::size_t ldb, T* c, std::size_t ldc, std::size_t r0,
           std::size_t r1, std::size_t n, T alpha) {
  using V = typename VecOf<T>::type;
  constexpr std::size_t W = sizeof(V) / sizeof(T);
  auto sweep = [&](auto full_tile, auto single_row, std::size_t j) {
    std::size_t i = r0;
    for (; i + kMr <= r1; i += kMr) full_tile(i, j);
    for (; i < r1; ++i) single_row(i, j);
  };
  std::size_t j = 0;
  for (; j + kNv * W <= n; j += kNv * W) {
    sweep(
        [&](std::size_t i, std::size_t jj) {
          micro_kernel<T, kMr, kNv>(kc, a + i * lda, lda, b + jj, ldb,
                                c + i * ldc + jj, ldc, alpha);
        },
        [&](std::size_t i, std::size_t jj) {
          micro_kernel<T, 1, kNv>(kc, a + i * lda, lda, b + jj, ldb,
                                c + i * ldc + jj, ldc, alpha);
        },
        j);
  }
  for (; j + W <= n; j += W) {
    sweep(
        [&](std::size_t i, std::size_t jj) {
          micro_kernel<T, kMr, 1>(kc, a + i * lda, lda, b + jj, ldb,
                                c + i * ldc + jj, ldc, alpha);
        },
        [&](std::size_t i, std::size_t jj) {
          micro_kernel<T, 1, 1>(kc, a + i * lda, lda, b + jj, ldb,
                                c + i * ldc + jj, ldc, alpha);
        },
        j);
  }
  if (j < n) {
    std::size_t i = r0;
    for (; i + kMr <= r1; i += kMr)
      scalar_tail<T, kMr>(kc, a + i * lda, lda, b, ldb, c + i * ldc, ldc, alpha,
                        j, n);
    for (; i < r1; ++i)
      scalar_tail<T, 1>(kc, a + i * lda, lda, b, ldb, c + i * ldc, ldc, alpha,
                        j, n);
  }
}

// C[m x n] += alpha * A[m x k] * B[k x n], plain (non-transposed) operands.
template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, T alpha, const T* a,
             std::size_t lda, const T* b, std::size_t ldb, T* c,
             std::size_t ldc) {
  const std::size_t chunks = (m + kRowChunk - 1) / kRowChunk;
#pragma omp parallel for schedule(static)
  for (std::size_t chunk = 0; chunk < chunks; ++chunk) {
    const std::size_t r0 = chunk * kRowChunk;
    const std::size_t r1 = std::min(m, r0 + kRowChunk);
    for (std::size_t p0 = 0; p0 < k; p0 += kBlockK) {
      const std::size_t kc = std::min(kBlockK, k - p0);
      panel(kc, a + p0, lda, b + p0 * ldb, ldb, c, ldc, r0, r1, n, alpha);
    }
  }
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

template <typename T>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          T alpha, const T* a, std::size_t lda, const T* b, std::size_t ldb,
          T beta, T* c, std::size_t ldc) {
  if (m == 0 || n == 0) return;
  if (beta == T{0}) {
    for (std::size_t i = 0; i < m; ++i) std::fill_n(c + i * ldc, n, T{0});
  } else if (beta != T{1}) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] *= beta;
  }
  if (k == 0 || alpha == T{0}) return;

  std::vector<T> a_packed;
  std::vector<T> b_packed;
  if (ta == Trans::Yes) {
    a_packed = transpose_copy(a, k, m, lda);
    a = a_packed.data();
    lda = k;
  }
  if (tb == Trans::Yes) {
    b_packed = transpose_copy(b, n, k, ldb);
    b = b_packed.data();
    ldb = n;
  }
  gemm_nn(m, n, k, alpha, a, lda, b, ldb, c, ldc);
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
#pragma omp parallel for schedule(static)
  for (std::size_t g = 0; g < n_groups; ++g) {
    const T* base = features + g * group_size * dim;
    std::vector<T> dist(group_size * group_size, T{0});
    for (std::size_t i = 0; i < group_size; ++i) {
      for (std::size_t j = i + 1; j < group_size; ++j) {
        T d = 0;
        for (std::size_t c = 0; c < dim; ++c) {
          const T diff = base[j * dim + c] - base[i * dim + c];
          d += diff * diff;
        }
        dist[i * group_size + j] = d;
        dist[j * group_size + i] = d;
      }
    }
    std::vector<std::int32_t> best(k);
    for (std::size_t i = 0; i < group_size; ++i) {
      // Insertion into a sorted list of length k; strict < keeps lower index
      // first on ties because candidates arrive in index order.
      std::size_t filled = 0;
      for (std::size_t j = 0; j < group_size; ++j) {
        if (j == i) continue;
        const T d = dist[i * group_size + j];
        if (filled == k && !(d < dist[i * group_size + best[k - 1]])) continue;
        std::size_t pos = filled < k ? filled++ : k - 1;
        while (pos > 0 && d < dist[i * group_size + best[pos - 1]]) {
          best[pos] = best[pos - 1];
          --pos;
        }
        best[pos] = static_cast<std::int32_t>(j);
      }
      std::copy(best.begin(), best.end(),
                out.begin() + static_cast<std::ptrdiff_t>((g * group_size + i) * k));
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

}  // namespace wip::kernels
