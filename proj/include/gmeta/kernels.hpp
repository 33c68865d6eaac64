#pragma once

// Dense and sparse arithmetic kernels behind the autodiff tape.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2+FMA variant compiled in its own translation unit. The active table is
// chosen once at startup from CPUID; GMETA_KERNELS=scalar|avx2 overrides it.
// The two variants agree to rounding (summation order and fused multiply-add
// differ), which the kernel equivalence tests pin down.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace gmeta::kernels {

enum class Isa { Scalar, Avx2 };

/// Compressed sparse rows with explicit values; column ids index the
/// right-hand operand's rows.
struct CsrView {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::span<const std::size_t> offsets;  // rows + 1 entries
  std::span<const std::uint32_t> indices;
  std::span<const double> values;
};

struct KernelTable {
  Isa isa;
  std::string_view name;

  /// c[m x n] = op(a) * op(b), overwriting c. op(a) is m x k; when trans_a
  /// the stored a is k x m (row-major). Likewise for b.
  void (*gemm)(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
               const double* a, const double* b, double* c);
  double (*dot)(const double* x, const double* y, std::size_t n);
  /// y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  void (*add)(const double* x, const double* y, double* out, std::size_t n);
  void (*sub)(const double* x, const double* y, double* out, std::size_t n);
  void (*mul)(const double* x, const double* y, double* out, std::size_t n);
  void (*scale)(double alpha, const double* x, double* out, std::size_t n);
  /// y = a * x (y has a.rows rows) or y = a^T * x (y has a.cols rows);
  /// x and y are row-major with `width` columns. y is overwritten.
  void (*spmm)(const CsrView& a, bool transpose, const double* x, std::size_t width, double* y);
};

const KernelTable& scalar_table();
/// True when the AVX2 table was compiled in and the CPU reports AVX2 and FMA.
bool avx2_available();
const KernelTable& avx2_table();  // throws std::runtime_error when unavailable

const KernelTable& table(Isa isa);
const KernelTable& active();
/// Switch the process-wide table. Intended for tests and benchmarks.
void select(Isa isa);

}  // namespace gmeta::kernels
