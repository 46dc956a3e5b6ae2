#pragma once

namespace volskin::ad {

// Dense double-precision matrix kernels used by the tape. Accumulation order
// per output element is fixed by construction (ascending inner index, one
// owner thread per row block), so results are reproducible run to run for a
// given binary.

// C[M x N] = A[M x K] * B[K x N]
void matmul_forward(const double* a, const double* b, double* c, int m, int k, int n);

// gA[M x K] += up[M x N] * B[K x N]^T
void matmul_grad_a(const double* up, const double* b, double* ga, int m, int k, int n);

// gB[K x N] += A[M x K]^T * up[M x N]
void matmul_grad_b(const double* a, const double* up, double* gb, int m, int k, int n);

}  // namespace volskin::ad
