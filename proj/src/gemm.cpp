#include "volskin/gemm.hpp"

#include <cstring>

namespace volskin::ad {

// i-k-j order: the j loop runs over contiguous rows of B and C and
// vectorizes; each C element sees k in ascending order.
void matmul_forward(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static) if (static_cast<long>(m) * k * n > 262144)
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<size_t>(i) * n;
    std::memset(crow, 0, sizeof(double) * n);
    const double* arow = a + static_cast<size_t>(i) * k;
    for (int kk = 0; kk < k; ++kk) {
      const double aik = arow[kk];
      const double* brow = b + static_cast<size_t>(kk) * n;
      for (int j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
}

// Row i of gA is a set of dot products between row i of up and rows of B,
// both contiguous.
void matmul_grad_a(const double* up, const double* b, double* ga, int m, int k, int n) {
#pragma omp parallel for schedule(static) if (static_cast<long>(m) * k * n > 262144)
  for (int i = 0; i < m; ++i) {
    const double* urow = up + static_cast<size_t>(i) * n;
    double* garow = ga + static_cast<size_t>(i) * k;
    for (int kk = 0; kk < k; ++kk) {
      const double* brow = b + static_cast<size_t>(kk) * n;
      double acc = 0.0;
#pragma omp simd reduction(+ : acc)
      for (int j = 0; j < n; ++j) acc += urow[j] * brow[j];
      garow[kk] += acc;
    }
  }
}

// Accumulates rank-1 updates row by row; gB is small and stays in cache.
// Kept single-threaded: every gB element is touched by every i.
void matmul_grad_b(const double* a, const double* up, double* gb, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<size_t>(i) * k;
    const double* urow = up + static_cast<size_t>(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      const double aik = arow[kk];
      if (aik == 0.0) continue;
      double* gbrow = gb + static_cast<size_t>(kk) * n;
      for (int j = 0; j < n; ++j) gbrow[j] += aik * urow[j];
    }
  }
}

}  // namespace volskin::ad
