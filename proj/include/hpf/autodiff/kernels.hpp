#pragma once

// Dense matrix kernels behind matmul and its backward pass.
//
// Every kernel has a serial reference and an OpenMP variant. The parallel
// variants split work over output rows only, so each output element is
// accumulated in the same order as the serial loop and the two agree
// bit-for-bit. `gemm`, `gemm_nt` and `gemm_tn` dispatch on problem size.

#include <cstddef>

namespace hpf::ad::kernels {

/// c[m,n] += a[m,k] * b[k,n]
void gemm_serial(const float* a, const float* b, float* c, int m, int k, int n);
void gemm_parallel(const float* a, const float* b, float* c, int m, int k, int n);
void gemm(const float* a, const float* b, float* c, int m, int k, int n);

/// c[m,k] += a[m,n] * b[k,n]^T
void gemm_nt_serial(const float* a, const float* b, float* c, int m, int n, int k);
void gemm_nt_parallel(const float* a, const float* b, float* c, int m, int n, int k);
void gemm_nt(const float* a, const float* b, float* c, int m, int n, int k);

/// c[k,n] += a[m,k]^T * b[m,n]
void gemm_tn_serial(const float* a, const float* b, float* c, int m, int k, int n);
void gemm_tn_parallel(const float* a, const float* b, float* c, int m, int k, int n);
void gemm_tn(const float* a, const float* b, float* c, int m, int k, int n);

/// Elementwise y = sigmoid(x) and y = tanh(x) over n floats. Polynomial
/// approximations (absolute error below 1e-6) that the compiler can
/// vectorize; x and y may alias.
void sigmoid_map(const float* x, float* y, std::size_t n);
void tanh_map(const float* x, float* y, std::size_t n);

/// Number of threads the parallel kernels will use (1 without OpenMP).
int max_threads();

/// Work (m*k*n) below which dispatchers stay serial.
inline constexpr long kParallelThreshold = 1L << 18;

}  // namespace hpf::ad::kernels
