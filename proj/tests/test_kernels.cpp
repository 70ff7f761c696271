#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "modewise/kernels/kernels.hpp"
#include "modewise/rng.hpp"

using namespace modewise;
namespace k = modewise::kernels;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-3, 3);
  return v;
}

}  // namespace

TEST(Kernels, ScalarReference) {
  std::vector<double> x = {1, 2, 3}, y = {1, 1, 1};
  k::scalar::axpy(2.0, x.data(), y.data(), 3);
  EXPECT_EQ(y, (std::vector<double>{3, 5, 7}));
  EXPECT_EQ(k::scalar::dot(x.data(), y.data(), 3), 3 + 10 + 21);
  std::vector<double> in = {-1, 0, 2, NAN}, out(4);
  k::scalar::relu(in.data(), out.data(), 4);
  EXPECT_EQ(out[0], 0.0);
  EXPECT_EQ(out[1], 0.0);
  EXPECT_EQ(out[2], 2.0);
  EXPECT_EQ(out[3], 0.0);
}

TEST(Kernels, SelectAndActive) {
  k::select(k::Isa::Scalar);
  EXPECT_EQ(k::active().isa, k::Isa::Scalar);
  if (k::avx2_supported()) {
    k::select(k::Isa::Avx2);
    EXPECT_EQ(k::active().isa, k::Isa::Avx2);
  } else {
    EXPECT_ANY_THROW(k::select(k::Isa::Avx2));
  }
  k::select(k::Isa::Scalar);
}

#ifdef MODEWISE_HAVE_AVX2_KERNELS
// Every length from 0 to 67 exercises the vector body and all tail sizes.
TEST(Kernels, Avx2MatchesScalar) {
  if (!k::avx2_supported()) GTEST_SKIP() << "CPU lacks AVX2/FMA";
  Rng rng(77);
  for (std::size_t n = 0; n < 68; ++n) {
    for (int rep = 0; rep < 5; ++rep) {
      const auto x = random_vec(rng, n), y0 = random_vec(rng, n);
      const double alpha = rng.uniform(-2, 2);
      auto ys = y0, yv = y0;
      k::scalar::axpy(alpha, x.data(), ys.data(), n);
      k::avx2::axpy(alpha, x.data(), yv.data(), n);
      for (std::size_t i = 0; i < n; ++i) ASSERT_NEAR(ys[i], yv[i], 1e-14 * (1 + std::fabs(ys[i])));

      const double ds = k::scalar::dot(x.data(), y0.data(), n);
      const double dv = k::avx2::dot(x.data(), y0.data(), n);
      double mag = 0.0;
      for (std::size_t i = 0; i < n; ++i) mag += std::fabs(x[i] * y0[i]);
      ASSERT_NEAR(ds, dv, 1e-14 * (1 + mag));

      std::vector<double> rs(n), rv(n);
      k::scalar::relu(x.data(), rs.data(), n);
      k::avx2::relu(x.data(), rv.data(), n);
      ASSERT_EQ(rs, rv);
    }
  }
}

TEST(Kernels, Avx2HandlesUnalignedPointers) {
  if (!k::avx2_supported()) GTEST_SKIP() << "CPU lacks AVX2/FMA";
  Rng rng(78);
  const auto buf = random_vec(rng, 41);
  for (std::size_t off = 0; off < 4; ++off) {
    const double* a = buf.data() + off;
    EXPECT_NEAR(k::scalar::dot(a, a, 37), k::avx2::dot(a, a, 37), 1e-12);
  }
}
#endif
