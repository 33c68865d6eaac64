// Built with -mavx2 -mfma; only reached through the dispatch table after a
// CPUID check.
#include <immintrin.h>

#include <algorithm>

#include "gmeta/kernels.hpp"

namespace gmeta::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double dot(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, const double* a,
          const double* b, double* c) {
  std::fill(c, c + m * n, 0.0);
  if (!tb) {
    // Row-axpy form: c[i,:] += a(i,p) * b[p,:].
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = ta ? a[p * m + i] : a[i * k + p];
        if (aip != 0.0) axpy(aip, b + p * n, c + i * n, n);
      }
    return;
  }
  if (!ta) {
    // Both operands walk contiguous rows: c[i,j] = <a[i,:], b[j,:]>.
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) c[i * n + j] = dot(a + i * k, b + j * k, k);
    return;
  }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[p * m + i] * b[j * k + p];
      c[i * n + j] = s;
    }
}

template <typename VecOp, typename ScalarOp>
inline void binary(const double* x, const double* y, double* out, std::size_t n, VecOp vop,
                   ScalarOp sop) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, vop(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) out[i] = sop(x[i], y[i]);
}

void add(const double* x, const double* y, double* out, std::size_t n) {
  binary(
      x, y, out, n, [](__m256d u, __m256d v) { return _mm256_add_pd(u, v); },
      [](double u, double v) { return u + v; });
}
void sub(const double* x, const double* y, double* out, std::size_t n) {
  binary(
      x, y, out, n, [](__m256d u, __m256d v) { return _mm256_sub_pd(u, v); },
      [](double u, double v) { return u - v; });
}
void mul(const double* x, const double* y, double* out, std::size_t n) {
  binary(
      x, y, out, n, [](__m256d u, __m256d v) { return _mm256_mul_pd(u, v); },
      [](double u, double v) { return u * v; });
}

void scale(double alpha, const double* x, double* out, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) out[i] = alpha * x[i];
}

void spmm(const CsrView& a, bool transpose, const double* x, std::size_t width, double* y) {
  const std::size_t out_rows = transpose ? a.cols : a.rows;
  std::fill(y, y + out_rows * width, 0.0);
  for (std::size_t r = 0; r < a.rows; ++r)
    for (std::size_t e = a.offsets[r]; e < a.offsets[r + 1]; ++e) {
      const std::size_t c = a.indices[e];
      if (transpose)
        axpy(a.values[e], x + r * width, y + c * width, width);
      else
        axpy(a.values[e], x + c * width, y + r * width, width);
    }
}

constexpr KernelTable kAvx2{Isa::Avx2, "avx2", gemm, dot, axpy, add, sub, mul, scale, spmm};

}  // namespace

const KernelTable& avx2_table_impl() { return kAvx2; }

}  // namespace gmeta::kernels
