#pragma once

#include <cstddef>

namespace trimodal::detail {

// C[m,n] += A[m,k] * B[k,n]
inline void gemm_nn(std::size_t m, std::size_t n, std::size_t k,
                    const double* A, const double* B, double* C) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* a_row = A + i * k;
    double* c_row = C + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double a = a_row[p];
      if (a == 0.0) continue;
      const double* b_row = B + p * n;
      for (std::size_t j = 0; j < n; ++j) c_row[j] += a * b_row[j];
    }
  }
}

// C[m,n] += A[m,k] * B[n,k]^T
inline void gemm_nt(std::size_t m, std::size_t n, std::size_t k,
                    const double* A, const double* B, double* C) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* a_row = A + i * k;
    double* c_row = C + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* b_row = B + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a_row[p] * b_row[p];
      c_row[j] += acc;
    }
  }
}

// C[m,n] += A[k,m]^T * B[k,n]
inline void gemm_tn(std::size_t m, std::size_t n, std::size_t k,
                    const double* A, const double* B, double* C) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* a_row = A + p * m;
    const double* b_row = B + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double a = a_row[i];
      if (a == 0.0) continue;
      double* c_row = C + i * n;
      for (std::size_t j = 0; j < n; ++j) c_row[j] += a * b_row[j];
    }
  }
}

}  // namespace trimodal::detail
