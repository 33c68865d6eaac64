#include <gtest/gtest.h>

#include <cmath>

#include "gmeta/kernels.hpp"
#include "gmeta/tape.hpp"
#include "test_util.hpp"

namespace gmeta {
namespace {

using kernels::Isa;

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Reference triple loop independent of both kernel tables.
std::vector<double> naive_gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k,
                               const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p)
        s += (ta ? a[p * m + i] : a[i * k + p]) * (tb ? b[j * k + p] : b[p * n + j]);
      c[i * n + j] = s;
    }
  return c;
}

void expect_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    EXPECT_NEAR(a[i], b[i], tol * (1.0 + std::abs(a[i]))) << "index " << i;
}

class KernelEquivalence : public ::testing::TestWithParam<Isa> {
 protected:
  void SetUp() override {
    if (GetParam() == Isa::Avx2 && !kernels::avx2_available()) GTEST_SKIP() << "no AVX2";
  }
  const kernels::KernelTable& k() const { return kernels::table(GetParam()); }
};

TEST_P(KernelEquivalence, GemmAllTransposeCombos) {
  Rng rng(7);
  for (std::size_t m : {1u, 3u, 8u, 13u})
    for (std::size_t n : {1u, 4u, 7u, 17u})
      for (std::size_t kk : {1u, 5u, 16u})
        for (int t = 0; t < 4; ++t) {
          const bool ta = t & 1, tb = t & 2;
          auto a = random_vec(m * kk, rng), b = random_vec(kk * n, rng);
          std::vector<double> c(m * n, 99.0);
          k().gemm(ta, tb, m, n, kk, a.data(), b.data(), c.data());
          expect_close(c, naive_gemm(ta, tb, m, n, kk, a, b), 1e-12);
        }
}

TEST_P(KernelEquivalence, ElementwiseMatchScalarTable) {
  Rng rng(11);
  const auto& ref = kernels::scalar_table();
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 31u, 64u, 101u}) {
    auto x = random_vec(n, rng), y = random_vec(n, rng);
    std::vector<double> o1(n), o2(n);
    k().add(x.data(), y.data(), o1.data(), n);
    ref.add(x.data(), y.data(), o2.data(), n);
    EXPECT_EQ(o1, o2);
    k().sub(x.data(), y.data(), o1.data(), n);
    ref.sub(x.data(), y.data(), o2.data(), n);
    EXPECT_EQ(o1, o2);
    k().mul(x.data(), y.data(), o1.data(), n);
    ref.mul(x.data(), y.data(), o2.data(), n);
    EXPECT_EQ(o1, o2);
    k().scale(-0.37, x.data(), o1.data(), n);
    ref.scale(-0.37, x.data(), o2.data(), n);
    EXPECT_EQ(o1, o2);
    EXPECT_NEAR(k().dot(x.data(), y.data(), n), ref.dot(x.data(), y.data(), n), 1e-12 * (n + 1));
    auto y1 = y, y2 = y;
    k().axpy(1.5, x.data(), y1.data(), n);
    ref.axpy(1.5, x.data(), y2.data(), n);
    expect_close(y1, y2, 1e-14);
  }
}

TEST_P(KernelEquivalence, SpmmBothDirections) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor dense = testing::random_tensor(9, 6, rng);
    ad::SparseMatrix sp;
    sp.rows = 9;
    sp.cols = 6;
    std::bernoulli_distribution keep(0.4);
    Tensor masked(9, 6);
    for (std::size_t r = 0; r < 9; ++r) {
      for (std::uint32_t c = 0; c < 6; ++c)
        if (keep(rng)) {
          sp.indices.push_back(c);
          sp.values.push_back(dense(r, c));
          masked(r, c) = dense(r, c);
        }
      sp.offsets.push_back(sp.indices.size());
    }
    for (std::size_t width : {1u, 4u, 5u}) {
      auto x = random_vec(6 * width, rng);
      std::vector<double> y(9 * width, 5.0);
      k().spmm(sp.view(), false, x.data(), width, y.data());
      std::vector<double> m(masked.values().begin(), masked.values().end());
      expect_close(y, naive_gemm(false, false, 9, width, 6, m, x), 1e-12);

      auto xt = random_vec(9 * width, rng);
      std::vector<double> yt(6 * width, 5.0);
      k().spmm(sp.view(), true, xt.data(), width, yt.data());
      expect_close(yt, naive_gemm(true, false, 6, width, 9, m, xt), 1e-12);
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Isa, KernelEquivalence, ::testing::Values(Isa::Scalar, Isa::Avx2),
                         [](const auto& info) {
                           return std::string(info.param == Isa::Scalar ? "scalar" : "avx2");
                         });

TEST(KernelDispatch, SelectSwitchesActiveTable) {
  const Isa before = kernels::active().isa;
  kernels::select(Isa::Scalar);
  EXPECT_EQ(kernels::active().isa, Isa::Scalar);
  if (kernels::avx2_available()) {
    kernels::select(Isa::Avx2);
    EXPECT_EQ(kernels::active().isa, Isa::Avx2);
  } else {
    EXPECT_THROW(kernels::select(Isa::Avx2), std::runtime_error);
  }
  kernels::select(before);
}

// A tape gradient computed under either table agrees to rounding.
TEST(KernelDispatch, TapeGradientAgreesAcrossTables) {
  if (!kernels::avx2_available()) GTEST_SKIP() << "no AVX2";
  Rng rng(5);
  const Tensor x = testing::random_tensor(7, 5, rng), w = testing::random_tensor(5, 3, rng);
  auto run = [&](Isa isa) {
    kernels::select(isa);
    ad::Tape t;
    auto wv = t.variable(w);
    auto y = t.relu(t.matmul(t.constant(x), wv));
    auto loss = t.sum_all(t.mul(y, y));
    auto g = t.gradient(loss, std::span(&wv, 1));
    return t.value(g[0]);
  };
  const Isa before = kernels::active().isa;
  const Tensor a = run(Isa::Scalar), b = run(Isa::Avx2);
  kernels::select(before);
  EXPECT_LT(max_abs_diff(a, b), 1e-12);
}

}  // namespace
}  // namespace gmeta
