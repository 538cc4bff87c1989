#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "conley/errors.hpp"
#include "conley/poly.hpp"
#include "conley/spectral.hpp"
#include "oracles.hpp"

using namespace conley;

namespace {

SpectralOperator linear6_op() {
  return SpectralOperator::make({-1.5, 1.5, -1.75, 1.75, -2.0, 2.0}, {}, 1.0,
                                -1.0, false);
}

StructuredCompactMap cubic_map(double coeff, double cutoff) {
  Poly p;
  Monomial m;
  m.coeff = coeff;
  m.factors = {{0, 3}};
  p.add_term(m);
  return StructuredCompactMap::make({0}, {{0, p}}, cutoff);
}

}  // namespace

TEST_CASE("cutoff is a plateau, a smooth ramp, and zero beyond") {
  CHECK(cutoff_chi(0.0, 1.0) == 1.0);
  CHECK(cutoff_chi(1.0, 1.0) == 1.0);
  CHECK(cutoff_chi(2.0, 1.0) == 0.0);
  CHECK(cutoff_chi(5.0, 1.0) == 0.0);
  CHECK(cutoff_chi(1.5, 1.0) == doctest::Approx(0.5));
  const double bound = cutoff_slope_bound(1.0);
  CHECK(bound == 1.5);
  double prev = cutoff_chi(1.0, 1.0);
  for (int i = 1; i <= 1000; ++i) {
    const double r = 1.0 + i * 1e-3;
    const double cur = cutoff_chi(r, 1.0);
    CHECK(cur <= prev);
    CHECK(std::fabs(cur - prev) <= bound * 1e-3 + 1e-12);
    prev = cur;
  }
}

TEST_CASE("operator construction validates its structure") {
  CHECK_THROWS_AS(SpectralOperator::make({1.0}, {}, -1.0, -2.0, false),
                  ValidationError);
  CHECK_THROWS_AS(SpectralOperator::make({1.0}, {}, 0.0, 0.0, true),
                  ValidationError);
  CHECK_THROWS_AS(
      SpectralOperator::make({1.0, 1.0}, {0.0, 0.5, 0.4, 0.0}, 1.0, -1.0, false),
      ValidationError);
  CHECK_THROWS_AS(SpectralOperator::make({1.0}, {}, 1.0, -1.0, false, 1.5),
                  ValidationError);
  CHECK_THROWS_AS(SpectralOperator::make({1.0}, {}, 1.0, -1.0, false, -1.0),
                  ValidationError);
  SpectralOperator ok = SpectralOperator::make({1.0}, {}, 1.0, -1.0, false, 0.5);
  CHECK(ok.spectral_gap == 0.5);
}

TEST_CASE("tail eigenvalues follow the coordinate-number parity") {
  SpectralOperator L = SpectralOperator::make({0.5, 0.5}, {}, 2.0, -3.0, false);
  CHECK(L.tail_at(2) == -3.0);  // coordinate number 3, odd
  CHECK(L.tail_at(3) == 2.0);   // coordinate number 4, even
  CHECK(L.tail_at(4) == -3.0);
  SpectralOperator S = SpectralOperator::make({0.5}, {}, 2.0, -3.0, true);
  CHECK(S.tail_at(1) == 2.0);
  CHECK(S.tail_at(2) == 2.0);
}

TEST_CASE("tail modifier shifts tail values and survives gap derivation") {
  SpectralOperator L = SpectralOperator::make({2.0}, {}, 1.0, -1.0, false);
  L.tail_modifier = DecayRule::geometric(0.25, 0.5);
  // coordinate numbers 2 and 3: even gets the plus tail, odd the minus
  CHECK(L.tail_at(1) == doctest::Approx(1.0 + 0.25 * 0.25));
  CHECK(L.tail_at(2) == doctest::Approx(-1.0 + 0.25 * 0.125));
}

TEST_CASE("derived spectral gap is the distance to the nonzero spectrum") {
  CHECK(linear6_op().spectral_gap == doctest::Approx(1.0));
  SpectralOperator k = SpectralOperator::make({0.0, 2.0}, {}, 1.0, -1.0, false);
  CHECK(k.spectral_gap == doctest::Approx(1.0));
  CHECK(k.kernel_dim() == 1);
  CHECK(linear6_op().kernel_dim() == 0);
  SpectralOperator tight = SpectralOperator::make({0.25}, {}, 1.0, -1.0, false);
  CHECK(tight.spectral_gap == doctest::Approx(0.25));
}

TEST_CASE("apply agrees with the dense window and the tail rule") {
  SpectralOperator L =
      SpectralOperator::make({1.0, -1.0}, {0.0, 0.25, 0.25, 0.0}, 1.0, -1.0,
                             false);
  testkit::Mat dense = testkit::dense_window(L, 6);
  testkit::Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Vec x;
    for (int i = 0; i < 6; ++i) x.set(i, rng.sym());
    Vec y = L.apply(x);
    for (int i = 0; i < 6; ++i) {
      double want = 0;
      for (int j = 0; j < 6; ++j) want += dense(i, j) * x.at(j);
      CHECK(y.at(i) == doctest::Approx(want).epsilon(1e-13));
    }
  }
  const std::vector<double> evs = L.core_eigenvalues();
  const double spectral_top =
      std::max(std::fabs(evs.front()), std::fabs(evs.back()));
  CHECK(L.op_norm_upper() >= spectral_top - 1e-12);
  CHECK(L.op_norm_upper() >= 1.0 - 1e-12);
}

TEST_CASE("kernel frame spans the near-zero core eigenspace") {
  SpectralOperator k =
      SpectralOperator::make({0.0, 2.0, -1.0}, {}, 1.0, -1.0, false);
  Frame f = kernel_frame(k);
  REQUIRE(f.dim == 1);
  Vec v = f.column(0);
  CHECK(k.apply(v).norm() <= 1e-12);
  CHECK(f.orth_defect() <= 1e-12);
  CHECK(kernel_frame(linear6_op()).dim == 0);
}

TEST_CASE("compact map evaluates cutoff polynomial plus linear parts") {
  StructuredCompactMap q = cubic_map(1.0, 1.0);
  CHECK(q.eval(Vec::unit(0, 0.5)).at(0) == doctest::Approx(0.125));
  CHECK(q.eval(Vec::unit(0, 3.0)).at(0) == 0.0);
  const double r = 1.5;  // inside the ramp: chi scales the whole polynomial
  CHECK(q.eval(Vec::unit(0, r)).at(0) ==
        doctest::Approx(cutoff_chi(r, 1.0) * r * r * r));

  StructuredCompactMap lin = StructuredCompactMap::zero();
  lin.linear_block = {0.0, 0.5, 0.5, 0.0};
  lin.linear_block_dim = 2;
  lin.diagonal_compact = DecayRule::power(1.0, 2.0);
  Vec x;
  x.set(0, 1.0);
  x.set(1, 2.0);
  x.set(3, 4.0);
  Vec y = lin.eval(x);
  CHECK(y.at(0) == doctest::Approx(0.5 * 2.0 + 1.0 * 1.0));
  CHECK(y.at(1) == doctest::Approx(0.5 * 1.0 + 2.0 / 4.0));
  CHECK(y.at(3) == doctest::Approx(4.0 / 16.0));
}

TEST_CASE("polynomial sup bounds dominate sampled values") {
  StructuredCompactMap q = cubic_map(1.0, 1.0);
  CHECK(q.poly_sup_ball(0.5) == doctest::Approx(0.125));
  CHECK(q.poly_sup_ball(10.0) == q.poly_sup_ball(2.0));
  const double g = q.global_poly_bound();
  CHECK(g == doctest::Approx(8.0));
  for (int i = 0; i <= 100; ++i) {
    const double r = 0.04 * i;
    CHECK(std::fabs(q.eval(Vec::unit(0, r)).at(0)) <= g + 1e-12);
  }
  CHECK_THROWS_AS(StructuredCompactMap::make(
                      {0}, {{0, Poly::linear(0, 1.0)}}, 0.0),
                  ValidationError);
  CHECK_THROWS_AS(StructuredCompactMap::make(
                      {1}, {{0, Poly::linear(0, 1.0)}}, 1.0),
                  ValidationError);
}

TEST_CASE("default growth witness is certified and sampled checks agree") {
  PermissibleField f =
      PermissibleField::make(linear6_op(), cubic_map(1.0, 1.0));
  CHECK(f.c1 == doctest::Approx(8.0));
  CHECK(f.c2 == doctest::Approx(16.0));
  GrowthCheck g = verify_growth_bound(f, 2000);
  CHECK(g.ok);
  CHECK(g.worst_violation <= 0.0);

  PermissibleField bad = PermissibleField::make_with_witness(
      linear6_op(), cubic_map(1.0, 1.0), 1e-6, 1e-6);
  GrowthCheck gb = verify_growth_bound(bad, 2000);
  CHECK_FALSE(gb.ok);
  CHECK(gb.worst_violation > 0.0);
}

TEST_CASE("field application is the sum of both parts") {
  PermissibleField f =
      PermissibleField::make(linear6_op(), cubic_map(2.0, 1.0));
  // keep the total norm inside the cutoff plateau so chi stays at 1
  Vec x = Vec::unit(0, 0.5);
  x.set(7, 0.1);
  Vec y = apply_field(f, x);
  CHECK(y.at(0) == doctest::Approx(-1.5 * 0.5 + 2.0 * 0.125));
  CHECK(y.at(7) == doctest::Approx(f.L.tail_at(7) * 0.1));
}

TEST_CASE("alternative decomposition preserves the field exactly") {
  PermissibleField f =
      PermissibleField::make(linear6_op(), cubic_map(1.0, 1.0));
  CompactPerturbation K;
  K.block_dim = 3;
  K.block.assign(9, 0.0);
  K.block[8] = 3.5;
  PermissibleField g = alternative_decomposition(f, K);

  auto evs = g.L.core_eigenvalues();
  CHECK(evs.front() == doctest::Approx(-2.0));
  bool has_flipped = false;
  for (double ev : evs) has_flipped |= std::fabs(ev - 1.75) < 1e-12;
  CHECK(has_flipped);
  int negatives = 0;
  for (double ev : evs) negatives += ev < 0;
  CHECK(negatives == 2);
  CHECK(g.L.spectral_gap == doctest::Approx(1.0));

  testkit::Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Vec x;
    for (int i = 0; i < 8; ++i) x.set(i, rng.sym());
    Vec want = apply_field(f, x);
    Vec got = apply_field(g, x);
    for (int i = 0; i < 8; ++i)
      CHECK(got.at(i) == doctest::Approx(want.at(i)).epsilon(1e-12));
  }

  CompactPerturbation back;
  back.block_dim = 3;
  back.block.assign(9, 0.0);
  back.block[8] = -3.5;
  PermissibleField h = alternative_decomposition(g, back);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j)
      CHECK(h.L.core[i * 6 + j] == doctest::Approx(f.L.core[i * 6 + j]));
  CHECK(h.Q.linear_norm_upper() <= 1e-12);
}

TEST_CASE("diagonal perturbations ride the decay rule") {
  PermissibleField f =
      PermissibleField::make(linear6_op(), StructuredCompactMap::zero());
  CompactPerturbation K;
  K.diagonal = DecayRule::geometric(0.1, 0.5);
  PermissibleField g = alternative_decomposition(f, K);
  CHECK(g.L.tail_at(6) ==
        doctest::Approx(f.L.tail_at(6) + K.diagonal.value(6)));
  Vec x = Vec::unit(9, 2.0);
  Vec want = apply_field(f, x);
  Vec got = apply_field(g, x);
  CHECK(got.at(9) == doctest::Approx(want.at(9)).epsilon(1e-12));
}
