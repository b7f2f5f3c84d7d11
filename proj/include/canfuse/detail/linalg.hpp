#pragma once

#include <cstddef>
#include <vector>

namespace canfuse::detail {

// Small dense kernels behind the layer ops. Both walk four output rows at a
// time with stack-resident accumulators so the inner loop is pure FMA over
// one streamed B row. Deterministic summation order.

inline constexpr std::size_t kGemmMaxN = 1200;

// C[m x n] += A[m x k] * B[k x n], row-major.
inline void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* A,
                    const double* B, double* C) {
  thread_local std::vector<double> scratch;
  scratch.resize(4 * n);
  double* acc0 = scratch.data();
  double* acc1 = acc0 + n;
  double* acc2 = acc1 + n;
  double* acc3 = acc2 + n;

  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const double* a0 = A + i * k;
    const double* a1 = a0 + k;
    const double* a2 = a1 + k;
    const double* a3 = a2 + k;
    double* c = C + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      acc0[j] = c[j];
      acc1[j] = c[n + j];
      acc2[j] = c[2 * n + j];
      acc3[j] = c[3 * n + j];
    }
    for (std::size_t p = 0; p < k; ++p) {
      const double x0 = a0[p], x1 = a1[p], x2 = a2[p], x3 = a3[p];
      const double* b = B + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double bj = b[j];
        acc0[j] += x0 * bj;
        acc1[j] += x1 * bj;
        acc2[j] += x2 * bj;
        acc3[j] += x3 * bj;
      }
    }
    for (std::size_t j = 0; j < n; ++j) {
      c[j] = acc0[j];
      c[n + j] = acc1[j];
      c[2 * n + j] = acc2[j];
      c[3 * n + j] = acc3[j];
    }
  }
  for (; i < m; ++i) {
    const double* a = A + i * k;
    double* c = C + i * n;
    for (std::size_t j = 0; j < n; ++j) acc0[j] = c[j];
    for (std::size_t p = 0; p < k; ++p) {
      const double x = a[p];
      const double* b = B + p * n;
      for (std::size_t j = 0; j < n; ++j) acc0[j] += x * b[j];
    }
    for (std::size_t j = 0; j < n; ++j) c[j] = acc0[j];
  }
}

// C[m x n] += A^T * B where A is k x m and B is k x n, row-major.
inline void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* A,
                    const double* B, double* C) {
  thread_local std::vector<double> scratch;
  scratch.resize(4 * n);
  double* acc0 = scratch.data();
  double* acc1 = acc0 + n;
  double* acc2 = acc1 + n;
  double* acc3 = acc2 + n;

  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    double* c = C + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      acc0[j] = c[j];
      acc1[j] = c[n + j];
      acc2[j] = c[2 * n + j];
      acc3[j] = c[3 * n + j];
    }
    for (std::size_t p = 0; p < k; ++p) {
      const double* a = A + p * m + i;  // four consecutive column entries
      const double x0 = a[0], x1 = a[1], x2 = a[2], x3 = a[3];
      const double* b = B + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double bj = b[j];
        acc0[j] += x0 * bj;
        acc1[j] += x1 * bj;
        acc2[j] += x2 * bj;
        acc3[j] += x3 * bj;
      }
    }
    for (std::size_t j = 0; j < n; ++j) {
      c[j] = acc0[j];
      c[n + j] = acc1[j];
      c[2 * n + j] = acc2[j];
      c[3 * n + j] = acc3[j];
    }
  }
  for (; i < m; ++i) {
    double* c = C + i * n;
    for (std::size_t j = 0; j < n; ++j) acc0[j] = c[j];
    for (std::size_t p = 0; p < k; ++p) {
      const double x = A[p * m + i];
      const double* b = B + p * n;
      for (std::size_t j = 0; j < n; ++j) acc0[j] += x * b[j];
    }
    for (std::size_t j = 0; j < n; ++j) c[j] = acc0[j];
  }
}

// out[n] += M^T[k x n] applied to v[k], i.e. out_j += sum_p M[p][j] v[p]
inline void add_vec_times_rows(std::size_t k, std::size_t n, const double* M,
                               const double* v, double* out) {
  for (std::size_t p = 0; p < k; ++p) {
    const double x = v[p];
    const double* row = M + p * n;
    for (std::size_t j = 0; j < n; ++j) out[j] += x * row[j];
  }
}

}  // namespace canfuse::detail
