#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "conley/errors.hpp"
#include "conley/subspace.hpp"
#include "oracles.hpp"

using namespace conley;

namespace {

SpectralOperator saddle_op() {
  return SpectralOperator::make({1.0, -1.0}, {}, 1.0, -1.0, false);
}

SpectralOperator linear6_op() {
  return SpectralOperator::make({-1.5, 1.5, -1.75, 1.75, -2.0, 2.0}, {}, 1.0,
                                -1.0, false);
}

Frame angle_frame(double theta) {
  return Frame::from_columns({0, 1}, {std::cos(theta), std::sin(theta)}, 1);
}

}  // namespace

TEST_CASE("commutator of the saddle with the diagonal line is exactly one") {
  Frame v = angle_frame(std::atan2(1.0, 1.0));
  CHECK(commutator_norm(saddle_op(), v) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("commutator along the rotating line follows |sin 2 theta|") {
  SpectralOperator L = saddle_op();
  for (int i = 0; i < 50; ++i) {
    const double theta = 0.13 + i * 0.06;
    const double got = commutator_norm(L, angle_frame(theta));
    CHECK(std::fabs(got - std::fabs(std::sin(2.0 * theta))) <= 1e-10);
  }
}

TEST_CASE("commutator norm matches the dense singular-value oracle") {
  testkit::Rng rng(31);
  SpectralOperator ops[2] = {
      linear6_op(),
      SpectralOperator::make({1.0, -1.0, 0.5},
                             {0.0, 0.2, 0.0, 0.2, 0.0, -0.1, 0.0, -0.1, 0.0},
                             2.0, -1.0, false)};
  const int window = 10;
  for (const auto& L : ops) {
    for (int trial = 0; trial < 25; ++trial) {
      const int dim = 1 + int(rng.next() % 4);
      Frame v = testkit::random_frame(rng, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, dim);
      testkit::Mat lw = testkit::dense_window(L, window);
      testkit::Mat p = testkit::projection_window(v, window);
      const double want = testkit::svd_norm(lw * p - p * lw);
      CHECK(std::fabs(commutator_norm(L, v) - want) <= 1e-10);
    }
  }
}

TEST_CASE("coordinate ladder commutators shrink and vanish past the core") {
  PermissibleField f =
      PermissibleField::make(linear6_op(), StructuredCompactMap::zero());
  std::vector<Frame> ladder = build_coordinate_ladder(f, 10);
  REQUIRE(ladder.size() == 10);
  double prev = commutator_norm(f.L, ladder[0]);
  for (size_t k = 1; k < ladder.size(); ++k) {
    const double cur = commutator_norm(f.L, ladder[k]);
    if (ladder[k].dim >= f.L.core_dim) {
      CHECK(cur <= prev + 1e-12);
      CHECK(cur <= 1e-12);
    }
    prev = cur;
  }
  // projections converge pointwise on any fixed vector with finite support
  Vec t;
  t.set(0, 0.3);
  t.set(4, -1.0);
  t.set(7, 0.5);
  CHECK(ladder[9].project_defect(t) <= 1e-12);
  CHECK(ladder[2].project_defect(t) > 0.5);
}

TEST_CASE("signature splits the compressed block by eigenvalue sign") {
  SpectralOperator L = linear6_op();
  Frame v4 = Frame::coordinate_span({0, 1, 2, 3});
  SignatureDecomposition sig = signature(L, v4, 1e-6);
  CHECK(sig.v_minus.dim == 2);
  CHECK(sig.v_plus.dim == 2);
  CHECK(sig.v_zero.dim == 0);
  REQUIRE(sig.eigen_minus.size() == 2);
  CHECK(sig.eigen_minus[0] == doctest::Approx(-1.75));
  CHECK(sig.eigen_minus[1] == doctest::Approx(-1.5));
  CHECK(sig.margin == doctest::Approx(1.5));
  CHECK(v4.contains(sig.v_minus));
  CHECK(v4.contains(sig.v_plus));

  SpectralOperator k = SpectralOperator::make({0.0, 1.0}, {}, 1.0, -1.0, false);
  Frame v2 = Frame::coordinate_span({0, 1});
  SignatureDecomposition degen = signature(k, v2, 1e-6);
  CHECK(degen.v_zero.dim == 1);
  CHECK_THROWS_AS(signature(k, v2, 1e-6, true), NondegeneracyError);
}

TEST_CASE("residual bound brackets the uncaptured nonlinearity") {
  Poly cubic;
  Monomial m;
  m.coeff = 1.0;
  m.factors = {{0, 3}};
  cubic.add_term(m);
  StructuredCompactMap q = StructuredCompactMap::make({0}, {{0, cubic}}, 6.0);

  Frame v0 = Frame::coordinate_span({0});
  ResidualBound captured = residual_compact_norm(q, v0, 0.5);
  CHECK(captured.lower <= captured.upper);
  CHECK(captured.upper <= 1e-12);  // every output lands inside V

  Frame v1 = Frame::coordinate_span({1});
  ResidualBound missed = residual_compact_norm(q, v1, 0.5);
  CHECK(missed.lower <= missed.upper);
  CHECK(missed.upper >= 0.125 - 1e-9);   // sup of |x0^3| over the half ball
  CHECK(missed.lower <= 0.125 + 1e-12);  // sampled lower bound cannot exceed it
}

TEST_CASE("admissibility decisions carry their reasons") {
  PermissibleField f =
      PermissibleField::make(linear6_op(), StructuredCompactMap::zero());
  AdmissibilityBudget b = AdmissibilityBudget::make(0.2, 0.2, 1e-6);

  AdmissibilityReport good = admissible(f, Frame::coordinate_span({0, 1, 2, 3}),
                                        1.0, b);
  CHECK(good.ok);
  CHECK(good.kernel_ok);
  CHECK(good.commutator_ok);
  CHECK(good.residual_ok);
  CHECK(good.commutator <= 1e-12);

  // a frame mixing a core and a tail direction has a large commutator
  Frame mixed = Frame::from_columns({0, 6}, {std::sqrt(0.5), std::sqrt(0.5)}, 1);
  AdmissibilityReport bad = admissible(f, mixed, 1.0, b);
  CHECK_FALSE(bad.ok);
  CHECK_FALSE(bad.commutator_ok);
  CHECK(bad.commutator > 0.2);

  // a frame missing the kernel is rejected with the kernel reason
  SpectralOperator withk =
      SpectralOperator::make({0.0, 1.0}, {}, 1.0, -1.0, false);
  PermissibleField fk =
      PermissibleField::make(withk, StructuredCompactMap::zero());
  AdmissibilityReport nok = admissible(fk, Frame::coordinate_span({1}), 1.0, b);
  CHECK_FALSE(nok.ok);
  CHECK_FALSE(nok.kernel_ok);
  CHECK(nok.kernel_defect > kKernelTol);
  AdmissibilityReport yk = admissible(fk, Frame::coordinate_span({0, 1}), 1.0, b);
  CHECK(yk.kernel_ok);
}

TEST_CASE("subspace extension walks the ladder until the budget holds") {
  PermissibleField f =
      PermissibleField::make(linear6_op(), StructuredCompactMap::zero());
  std::vector<Frame> ladder = build_coordinate_ladder(f, 10);
  Frame w = Frame::from_columns({0, 6}, {0.6, 0.8}, 1);
  Frame e = extend_subspace(f.L, w, 1e-9, ladder);
  CHECK(e.contains(w));
  CHECK(commutator_norm(f.L, e) < 1e-9);
}

TEST_CASE("block-diagonal defect is bounded by the two commutators") {
  testkit::Rng rng(47);
  SpectralOperator L = linear6_op();
  const int window = 10;
  testkit::Mat lw = testkit::dense_window(L, window);
  const testkit::Mat id = testkit::Mat::Identity(window, window);
  for (int trial = 0; trial < 25; ++trial) {
    const int dw = 2 + int(rng.next() % 4);
    const int dv = 1 + int(rng.next() % (dw - 1));
    auto [v, w] =
        testkit::random_nested(rng, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, dw, dv);
    testkit::Mat pv = testkit::projection_window(v, window);
    testkit::Mat pw = testkit::projection_window(w, window);
    testkit::Mat pu = pw - pv;
    testkit::Mat defect = lw - pv * lw * pv - pu * lw * pu -
                          (id - pw) * lw * (id - pw);
    const double lhs = testkit::svd_norm(defect);
    const double rhs = commutator_norm(L, w) + commutator_norm(L, v);
    CHECK(rhs - lhs >= -1e-10);
  }
}
