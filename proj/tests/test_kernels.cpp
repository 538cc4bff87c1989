#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "conley/kernels.hpp"
#include "oracles.hpp"

using conley::kernels::avx2_ops;
using conley::kernels::ops;
using conley::kernels::scalar_ops;

namespace {

std::vector<double> random_buf(testkit::Rng& rng, std::size_t n,
                               double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.sym();
  return v;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

bool same_bits(double a, double b) {
  return std::memcmp(&a, &b, sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("scalar and avx2 reductions are bit-identical") {
  testkit::Rng rng(11);
  const auto& s = scalar_ops();
  const auto& v = avx2_ops();
  for (std::size_t n = 0; n <= 67; ++n) {
    auto a = random_buf(rng, n, 3.0);
    auto b = random_buf(rng, n, 0.25);
    CHECK(same_bits(s.dot(a.data(), b.data(), n), v.dot(a.data(), b.data(), n)));
    CHECK(same_bits(s.sum_sq(a.data(), n), v.sum_sq(a.data(), n)));
  }
}

TEST_CASE("scalar and avx2 elementwise kernels are bit-identical") {
  testkit::Rng rng(12);
  const auto& s = scalar_ops();
  const auto& v = avx2_ops();
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 16u, 33u, 64u}) {
    auto x = random_buf(rng, n);
    auto k = random_buf(rng, n);
    double a = rng.sym() * 2.0;

    auto ys = random_buf(rng, n);
    auto yv = ys;
    s.axpy(a, x.data(), ys.data(), n);
    v.axpy(a, x.data(), yv.data(), n);
    CHECK(same_bits(ys, yv));

    std::vector<double> os(n), ov(n);
    s.axpby_to(os.data(), x.data(), a, k.data(), n);
    v.axpby_to(ov.data(), x.data(), a, k.data(), n);
    CHECK(same_bits(os, ov));

    auto xs = x, xv = x;
    s.scale(a, xs.data(), n);
    v.scale(a, xv.data(), n);
    CHECK(same_bits(xs, xv));
  }
}

TEST_CASE("scalar and avx2 matvec and rk4_combine are bit-identical") {
  testkit::Rng rng(13);
  const auto& s = scalar_ops();
  const auto& v = avx2_ops();
  for (std::size_t rows : {1u, 2u, 5u, 8u}) {
    for (std::size_t cols : {1u, 3u, 4u, 9u, 17u}) {
      auto m = random_buf(rng, rows * cols);
      auto x = random_buf(rng, cols);
      std::vector<double> ys(rows), yv(rows);
      s.matvec(m.data(), x.data(), ys.data(), rows, cols);
      v.matvec(m.data(), x.data(), yv.data(), rows, cols);
      CHECK(same_bits(ys, yv));
    }
  }
  for (std::size_t n : {1u, 4u, 6u, 15u, 32u}) {
    auto y = random_buf(rng, n);
    auto k1 = random_buf(rng, n);
    auto k2 = random_buf(rng, n);
    auto k3 = random_buf(rng, n);
    auto k4 = random_buf(rng, n);
    std::vector<double> os(n), ov(n);
    s.rk4_combine(os.data(), y.data(), k1.data(), k2.data(), k3.data(),
                  k4.data(), 0.037, n);
    v.rk4_combine(ov.data(), y.data(), k1.data(), k2.data(), k3.data(),
                  k4.data(), 0.037, n);
    CHECK(same_bits(os, ov));
  }
}

TEST_CASE("kernels compute the documented quantities") {
  testkit::Rng rng(14);
  const std::size_t n = 23;
  auto a = random_buf(rng, n);
  auto b = random_buf(rng, n);
  const auto& k = ops();

  long double dot_ref = 0.0L, sq_ref = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    dot_ref += (long double)a[i] * b[i];
    sq_ref += (long double)a[i] * a[i];
  }
  CHECK(k.dot(a.data(), b.data(), n) ==
        doctest::Approx((double)dot_ref).epsilon(1e-13));
  CHECK(k.sum_sq(a.data(), n) ==
        doctest::Approx((double)sq_ref).epsilon(1e-13));

  auto y = random_buf(rng, n);
  auto y_ref = y;
  k.axpy(0.5, a.data(), y.data(), n);
  for (std::size_t i = 0; i < n; ++i) y_ref[i] += 0.5 * a[i];
  CHECK(same_bits(y, y_ref));

  std::vector<double> out(n);
  k.axpby_to(out.data(), a.data(), -2.0, b.data(), n);
  for (std::size_t i = 0; i < n; ++i)
    CHECK(same_bits(out[i], a[i] + -2.0 * b[i]));

  std::vector<double> m(2 * n);
  for (auto& x : m) x = rng.sym();
  std::vector<double> mv(2);
  k.matvec(m.data(), a.data(), mv.data(), 2, n);
  CHECK(mv[0] == doctest::Approx(k.dot(m.data(), a.data(), n)));
  CHECK(mv[1] == doctest::Approx(k.dot(m.data() + n, a.data(), n)));
}

TEST_CASE("exact integer data gives exact reductions") {
  std::vector<double> a, b;
  for (int i = 0; i < 21; ++i) {
    a.push_back(double((i % 7) - 3));
    b.push_back(double((i % 5) - 2));
  }
  double want = 0;
  for (int i = 0; i < 21; ++i) want += a[i] * b[i];
  CHECK(ops().dot(a.data(), b.data(), a.size()) == want);
}

TEST_CASE("dispatcher selects a named variant") {
  const char* name = ops().name;
  bool known = std::strcmp(name, "scalar") == 0 || std::strcmp(name, "avx2") == 0;
  CHECK(known);
  if (conley::kernels::avx2_supported())
    CHECK(std::strcmp(avx2_ops().name, "avx2") == 0);
}
