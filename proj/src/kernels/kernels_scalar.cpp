#include <algorithm>

#include "gmeta/kernels.hpp"

namespace gmeta::kernels {
namespace {

void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, const double* a,
          const double* b, double* c) {
  std::fill(c, c + m * n, 0.0);
  const auto A = [&](std::size_t i, std::size_t p) { return ta ? a[p * m + i] : a[i * k + p]; };
  const auto B = [&](std::size_t p, std::size_t j) { return tb ? b[j * k + p] : b[p * n + j]; };
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A(i, p);
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * B(p, j);
    }
}

double dot(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void add(const double* x, const double* y, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
}

void sub(const double* x, const double* y, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] - y[i];
}

void mul(const double* x, const double* y, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

void scale(double alpha, const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = alpha * x[i];
}

void spmm(const CsrView& a, bool transpose, const double* x, std::size_t width, double* y) {
  const std::size_t out_rows = transpose ? a.cols : a.rows;
  std::fill(y, y + out_rows * width, 0.0);
  for (std::size_t r = 0; r < a.rows; ++r) {
    for (std::size_t e = a.offsets[r]; e < a.offsets[r + 1]; ++e) {
      const std::size_t c = a.indices[e];
      const double w = a.values[e];
      if (transpose)
        axpy(w, x + r * width, y + c * width, width);
      else
        axpy(w, x + c * width, y + r * width, width);
    }
  }
}

constexpr KernelTable kScalar{Isa::Scalar, "scalar", gemm, dot, axpy, add, sub, mul, scale, spmm};

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

}  // namespace gmeta::kernels
