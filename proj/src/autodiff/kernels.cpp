#include "hpf/autodiff/kernels.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hpf::ad::kernels {
namespace {

// Register tiles of up to kMr rows by kNr columns. Every output element is
// accumulated over the inner dimension in increasing order whichever tile
// computes it, so the serial and parallel drivers agree bit for bit.
constexpr int kMr = 8;
constexpr int kNr = 32;

// Strided view of the left operand: element (r, p) is at a[r*rs + p*cs].
struct Lhs {
  const float* a;
  long rs;
  long cs;
  float at(long r, long p) const { return a[r * rs + p * cs]; }
};

// c[R, cols] += A[r0 : r0 + R, :k] * b[k, C]. Only the first `cols` of the
// C columns are read from and written to c; b must have C readable columns.
template <int R, int C>
void tile(const Lhs& a, long r0, const float* __restrict b, long ldb, float* __restrict c, long ldc, int k, int cols) {
  float acc[R][C];
  for (int r = 0; r < R; ++r)
    for (int j = 0; j < C; ++j) acc[r][j] = j < cols ? c[(r0 + r) * ldc + j] : 0.0f;
  for (int p = 0; p < k; ++p) {
    const float* __restrict bp = b + p * ldb;
    for (int r = 0; r < R; ++r) {
      const float av = a.at(r0 + r, p);
      for (int j = 0; j < C; ++j) acc[r][j] += av * bp[j];
    }
  }
  for (int r = 0; r < R; ++r)
    for (int j = 0; j < cols; ++j) c[(r0 + r) * ldc + j] = acc[r][j];
}

template <int C>
void tile_rows(int rows, const Lhs& a, long r0, const float* b, long ldb, float* c, long ldc, int k, int cols) {
  switch (rows) {
    case 1: return tile<1, C>(a, r0, b, ldb, c, ldc, k, cols);
    case 2: return tile<2, C>(a, r0, b, ldb, c, ldc, k, cols);
    case 3: return tile<3, C>(a, r0, b, ldb, c, ldc, k, cols);
    case 4: return tile<4, C>(a, r0, b, ldb, c, ldc, k, cols);
    case 5: return tile<5, C>(a, r0, b, ldb, c, ldc, k, cols);
    case 6: return tile<6, C>(a, r0, b, ldb, c, ldc, k, cols);
    case 7: return tile<7, C>(a, r0, b, ldb, c, ldc, k, cols);
    default: return tile<kMr, C>(a, r0, b, ldb, c, ldc, k, cols);
  }
}

// The right operand split into full kNr-wide column blocks, read in place,
// and a zero-padded copy of the remaining columns.
struct Rhs {
  const float* b;
  int k;
  int n;
  int full_cols;
  int tail_width = 0;  // 0, 8, 16 or 32
  std::vector<float> tail;

  Rhs(const float* b_, int k_, int n_) : b(b_), k(k_), n(n_), full_cols(n_ / kNr * kNr) {
    const int rem = n - full_cols;
    if (rem == 0) return;
    tail_width = rem <= 8 ? 8 : rem <= 16 ? 16 : kNr;
    tail.assign(static_cast<std::size_t>(k) * tail_width, 0.0f);
    for (int p = 0; p < k; ++p)
      std::copy_n(b + static_cast<long>(p) * n + full_cols, rem, tail.data() + static_cast<long>(p) * tail_width);
  }
};

// Rows [r0, r1) of c[rows, n] += A[rows, k] * b[k, n].
void row_block(const Lhs& a, long r0, long r1, const Rhs& b, float* c) {
  const int rows = static_cast<int>(r1 - r0);
  const long n = b.n;
  for (long j0 = 0; j0 < b.full_cols; j0 += kNr) tile_rows<kNr>(rows, a, r0, b.b + j0, n, c + j0, n, b.k, kNr);
  float* ct = c + b.full_cols;
  const int rem = b.n - b.full_cols;
  switch (b.tail_width) {
    case 8: tile_rows<8>(rows, a, r0, b.tail.data(), 8, ct, n, b.k, rem); break;
    case 16: tile_rows<16>(rows, a, r0, b.tail.data(), 16, ct, n, b.k, rem); break;
    case kNr: tile_rows<kNr>(rows, a, r0, b.tail.data(), kNr, ct, n, b.k, rem); break;
    default: break;
  }
}

void driver_serial(const Lhs& a, const float* b, float* c, int rows, int k, int n) {
  const Rhs rhs(b, k, n);
  for (long r0 = 0; r0 < rows; r0 += kMr) row_block(a, r0, std::min<long>(r0 + kMr, rows), rhs, c);
}

void driver_parallel(const Lhs& a, const float* b, float* c, int rows, int k, int n) {
  const Rhs rhs(b, k, n);
  const long blocks = (rows + kMr - 1) / kMr;
#pragma omp parallel for schedule(static)
  for (long blk = 0; blk < blocks; ++blk) {
    const long r0 = blk * kMr;
    row_block(a, r0, std::min<long>(r0 + kMr, rows), rhs, c);
  }
}

std::vector<float> transpose(const float* b, int rows, int cols) {
  std::vector<float> t(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) t[static_cast<std::size_t>(c) * rows + r] = b[static_cast<long>(r) * cols + c];
  return t;
}

// exp(x) for x in roughly [-87, 88]: x = k ln2 + r with |r| <= ln2 / 2,
// a degree-6 polynomial for exp(r), and 2^k assembled from its exponent bits.
inline float exp_poly(float x) {
  x = x < -87.0f ? -87.0f : x;
  x = x > 88.0f ? 88.0f : x;
  // Round to nearest by adding and removing 1.5 * 2^23.
  const float k = (x * 1.44269504088896341f + 12582912.0f) - 12582912.0f;
  const float r = x - k * 0.693359375f + k * 2.12194440e-4f;
  float p = 1.9875691500e-4f;
  p = p * r + 1.3981999507e-3f;
  p = p * r + 8.3334519073e-3f;
  p = p * r + 4.1665795894e-2f;
  p = p * r + 1.6666665459e-1f;
  p = p * r + 5.0000001201e-1f;
  p = p * r * r + r + 1.0f;
  const auto bits = static_cast<std::uint32_t>(static_cast<std::int32_t>(k) + 127) << 23;
  return p * std::bit_cast<float>(bits);
}

bool large(int m, int k, int n) {
  return static_cast<long>(m) * k * n >= kParallelThreshold && max_threads() > 1;
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void sigmoid_map(const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = 1.0f / (1.0f + exp_poly(-x[i]));
}

void tanh_map(const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const float v = x[i];
    const float a = std::fabs(v);
    // Odd polynomial near zero, where 1 - e^{-2a} would cancel.
    const float z = v * v;
    float p = -5.70498872745e-3f;
    p = p * z + 2.06390887954e-2f;
    p = p * z - 5.37397155531e-2f;
    p = p * z + 1.33314422036e-1f;
    p = p * z - 3.33332819422e-1f;
    const float small = p * z * v + v;
    const float e = exp_poly(-2.0f * a);
    const float big = std::copysign((1.0f - e) / (1.0f + e), v);
    y[i] = a < 0.625f ? small : big;
  }
}

void gemm_serial(const float* a, const float* b, float* c, int m, int k, int n) {
  driver_serial({a, k, 1}, b, c, m, k, n);
}

void gemm_parallel(const float* a, const float* b, float* c, int m, int k, int n) {
  driver_parallel({a, k, 1}, b, c, m, k, n);
}

void gemm(const float* a, const float* b, float* c, int m, int k, int n) {
  if (large(m, k, n))
    gemm_parallel(a, b, c, m, k, n);
  else
    gemm_serial(a, b, c, m, k, n);
}

void gemm_nt_serial(const float* a, const float* b, float* c, int m, int n, int k) {
  const std::vector<float> bt = transpose(b, k, n);
  gemm_serial(a, bt.data(), c, m, n, k);
}

void gemm_nt_parallel(const float* a, const float* b, float* c, int m, int n, int k) {
  const std::vector<float> bt = transpose(b, k, n);
  gemm_parallel(a, bt.data(), c, m, n, k);
}

void gemm_nt(const float* a, const float* b, float* c, int m, int n, int k) {
  const std::vector<float> bt = transpose(b, k, n);
  gemm(a, bt.data(), c, m, n, k);
}

// c[k, n] += a[m, k]^T b[m, n]: the left operand is a read column-wise.
void gemm_tn_serial(const float* a, const float* b, float* c, int m, int k, int n) {
  driver_serial({a, 1, k}, b, c, k, m, n);
}

void gemm_tn_parallel(const float* a, const float* b, float* c, int m, int k, int n) {
  driver_parallel({a, 1, k}, b, c, k, m, n);
}

void gemm_tn(const float* a, const float* b, float* c, int m, int k, int n) {
  if (large(m, k, n))
    gemm_tn_parallel(a, b, c, m, k, n);
  else
    gemm_tn_serial(a, b, c, m, k, n);
}

}  // namespace hpf::ad::kernels
