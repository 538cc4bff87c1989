#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "conley/errors.hpp"
#include "conley/flow.hpp"
#include "conley/subspace.hpp"
#include "oracles.hpp"

using namespace conley;

namespace {

PermissibleField saddle_field() {
  return PermissibleField::make(
      SpectralOperator::make({1.0, -1.0}, {}, 1.0, -1.0, false),
      StructuredCompactMap::zero());
}

PermissibleField repeller_field(double coeff) {
  Poly cubic;
  Monomial m;
  m.coeff = coeff;
  m.factors = {{0, 3}};
  cubic.add_term(m);
  return PermissibleField::make(
      SpectralOperator::make({-1.0}, {}, 1.0, -1.0, false),
      StructuredCompactMap::make({0}, {{0, cubic}}, 6.0));
}

PermissibleField linear6_field() {
  return PermissibleField::make(
      SpectralOperator::make({-1.5, 1.5, -1.75, 1.75, -2.0, 2.0}, {}, 1.0,
                             -1.0, false),
      StructuredCompactMap::zero());
}

std::vector<double> eval_at(const FiniteField& f, std::vector<double> v) {
  Workspace ws;
  std::vector<double> out(f.dim());
  f.eval(v, out, ws);
  return out;
}

// closed-form time-t solution of v' = v - v^3 starting at v0 in (0, 1)
double cubic_flow(double v0, double t) {
  const double e = std::exp(t);
  return v0 * e / std::sqrt(1.0 + v0 * v0 * (e * e - 1.0));
}

}  // namespace

TEST_CASE("compression agrees with the projected ambient field") {
  PermissibleField F = repeller_field(1.0);
  Frame v = Frame::coordinate_span({0, 1});
  FiniteField f = compress_field(F, v, {0.0, 0.0}, {2.0, 2.0});
  testkit::Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> coords = {2.0 * rng.sym(), 2.0 * rng.sym()};
    Vec x = v.from_coords(coords);
    std::vector<double> want = v.to_coords(apply_field(F, x));
    std::vector<double> got = eval_at(f, coords);
    for (int i = 0; i < 2; ++i)
      CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
  CHECK(f.norm_bound > 0.0);
  CHECK(f.lip_bound > 0.0);
  const std::vector<double> inside{1.0, -1.0};
  const std::vector<double> outside{2.5, 0.0};
  CHECK(f.in_box(inside));
  CHECK_FALSE(f.in_box(outside));
}

TEST_CASE("both decompositions compress to the same finite field") {
  PermissibleField a = linear6_field();
  CompactPerturbation k;
  k.block_dim = 3;
  k.block.assign(9, 0.0);
  k.block[8] = 3.5;
  PermissibleField b = alternative_decomposition(a, k);
  Frame v = Frame::coordinate_span({0, 1, 2, 3});
  FiniteField fa = compress_field(a, v, {0, 0, 0, 0}, {2, 2, 2, 2});
  FiniteField fb = compress_field(b, v, {0, 0, 0, 0}, {2, 2, 2, 2});
  for (int i = 0; i < 16; ++i)
    CHECK(fa.lin[i] == doctest::Approx(fb.lin[i]).epsilon(1e-12));
  testkit::Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> coords(4);
    for (auto& c : coords) c = 1.5 * rng.sym();
    auto ga = eval_at(fa, coords);
    auto gb = eval_at(fb, coords);
    for (int i = 0; i < 4; ++i)
      CHECK(ga[i] == doctest::Approx(gb[i]).epsilon(1e-12));
  }
}

TEST_CASE("saddle time map reproduces the closed-form exponential") {
  FiniteField f = compress_field(saddle_field(), Frame::coordinate_span({0, 1}),
                                 {0.0, 0.0}, {3.0, 3.0});
  const double tau = std::log(2.0);
  FlowStep step = time_tau_map(f, std::vector<double>{1.0, 1.0}, tau, 1e-9);
  CHECK(step.r_enc < 1e-6);
  CHECK(std::fabs(step.end[0] - 0.5) <= step.r_enc);
  CHECK(std::fabs(step.end[1] - 2.0) <= step.r_enc);
  CHECK(step.tau == tau);
  CHECK(step.start[0] == 1.0);
}

TEST_CASE("cubic repeller time map matches the logistic solution") {
  FiniteField f = compress_field(repeller_field(1.0),
                                 Frame::coordinate_span({0}), {0.0}, {2.0});
  for (double v0 : {0.1, 0.5, 0.9}) {
    FlowStep step = time_tau_map(f, std::vector<double>{v0}, 0.5, 1e-9);
    CHECK(std::fabs(step.end[0] - cubic_flow(v0, 0.5)) <= step.r_enc);
    CHECK(step.r_enc < 1e-4);
  }
}

TEST_CASE("loose-tolerance enclosures still cover the tight answer") {
  FiniteField f = compress_field(repeller_field(1.0),
                                 Frame::coordinate_span({0}), {0.0}, {2.0});
  FlowStep tight = time_tau_map(f, std::vector<double>{0.7}, 0.5, 1e-12);
  FlowStep loose = time_tau_map(f, std::vector<double>{0.7}, 0.5, 1e-4);
  CHECK(std::fabs(loose.end[0] - tight.end[0]) <= loose.r_enc);
  CHECK(loose.r_enc > tight.r_enc);
}

TEST_CASE("leaving the stated box raises a bracketed error") {
  FiniteField f = compress_field(saddle_field(), Frame::coordinate_span({0, 1}),
                                 {0.0, 0.0}, {3.0, 3.0});
  bool thrown = false;
  try {
    time_tau_map(f, std::vector<double>{0.0, 2.9}, 1.0, 1e-9);
  } catch (const BoxExitError& e) {
    thrown = true;
    CHECK(e.t_lo >= 0.0);
    CHECK(e.t_lo < e.t_hi);
    CHECK(e.t_hi <= 1.0);
    // the expanding coordinate crosses 3.0 at log(3/2.9)
    CHECK(e.t_hi >= std::log(3.0 / 2.9) - 1e-9);
  }
  CHECK(thrown);
  CHECK_THROWS_AS(time_tau_map(f, std::vector<double>{0.0, 3.5}, 1.0, 1e-9),
                  ValidationError);
}

TEST_CASE("rank-one move shifts the pseudometric by twice its norm") {
  PermissibleField a = linear6_field();
  CompactPerturbation k;
  k.block_dim = 1;
  k.block = {0.5};
  PermissibleField b = alternative_decomposition(a, k);
  CHECK(decomposition_pseudometric(a, b, 1.0) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(decomposition_pseudometric(a, a, 1.0) == 0.0);
  CHECK(decomposition_pseudometric(b, b, 1.0) == 0.0);
}

TEST_CASE("pseudometric is symmetric and satisfies the triangle bound") {
  PermissibleField a = linear6_field();
  CompactPerturbation k1;
  k1.block_dim = 2;
  k1.block = {0.3, 0.0, 0.0, 0.0};
  CompactPerturbation k2;
  k2.block_dim = 2;
  k2.block = {0.0, 0.2, 0.2, 0.0};
  PermissibleField b = alternative_decomposition(a, k1);
  PermissibleField c = alternative_decomposition(b, k2);
  const double ab = decomposition_pseudometric(a, b, 1.0);
  const double ba = decomposition_pseudometric(b, a, 1.0);
  const double bc = decomposition_pseudometric(b, c, 1.0);
  const double ac = decomposition_pseudometric(a, c, 1.0);
  CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
  CHECK(ac <= ab + bc + 1e-12);
  CHECK(ab > 0.0);
}

TEST_CASE("homotopy family interpolates fields linearly") {
  Frame v = Frame::coordinate_span({0});
  FiniteField a = compress_field(repeller_field(1.0), v, {0.0}, {2.0});
  FiniteField b = compress_field(repeller_field(0.9), v, {0.0}, {2.0});
  FiniteField mid = homotopy_family(a, b, 0.5);
  for (double x : {0.25, 0.8, 1.5}) {
    const double want = -x + 0.95 * x * x * x;
    CHECK(eval_at(mid, {x})[0] == doctest::Approx(want).epsilon(1e-12));
  }
  CHECK(eval_at(homotopy_family(a, b, 0.0), {0.7})[0] ==
        doctest::Approx(eval_at(a, {0.7})[0]));
  CHECK(eval_at(homotopy_family(a, b, 1.0), {0.7})[0] ==
        doctest::Approx(eval_at(b, {0.7})[0]));
  CHECK(mid.lip_bound <= std::max(a.lip_bound, b.lip_bound) + 1e-12);
}

TEST_CASE("product field evaluates componentwise on disjoint supports") {
  PermissibleField F = repeller_field(1.0);
  FiniteField a = compress_field(F, Frame::coordinate_span({0}), {0.0}, {2.0});
  FiniteField b = compress_field(F, Frame::coordinate_span({1}), {0.0}, {2.0});
  FiniteField p = product_field(a, b);
  REQUIRE(p.dim() == 2);
  auto out = eval_at(p, {0.5, 0.75});
  CHECK(out[0] == doctest::Approx(-0.5 + 0.125).epsilon(1e-12));
  CHECK(out[1] == doctest::Approx(0.75).epsilon(1e-12));  // tail eigenvalue +1
}

TEST_CASE("comparison matrix makes contracting axes contract") {
  FiniteField f = compress_field(saddle_field(), Frame::coordinate_span({0, 1}),
                                 {0.0, 0.0}, {3.0, 3.0});
  std::vector<double> g = comparison_matrix(f);
  REQUIRE(g.size() == 4);
  CHECK(g[0] == doctest::Approx(-1.0));  // flow contracts the first axis
  CHECK(g[3] == doctest::Approx(1.0));
  CHECK(g[1] == doctest::Approx(0.0));
  CHECK(g[2] == doctest::Approx(0.0));
  std::vector<double> e = mat_exp(g, 2, 0.7);
  CHECK(e[0] == doctest::Approx(std::exp(-0.7)).epsilon(1e-10));
  CHECK(e[3] == doctest::Approx(std::exp(0.7)).epsilon(1e-10));
}

TEST_CASE("matrix exponential reproduces closed forms") {
  std::vector<double> nil = {0.0, 1.0, 0.0, 0.0};
  std::vector<double> en = mat_exp(nil, 2, 0.9);
  CHECK(en[0] == doctest::Approx(1.0));
  CHECK(en[1] == doctest::Approx(0.9));
  CHECK(en[2] == doctest::Approx(0.0));
  CHECK(en[3] == doctest::Approx(1.0));

  const double th = 0.6;
  std::vector<double> rot = {0.0, -1.0, 1.0, 0.0};
  std::vector<double> er = mat_exp(rot, 2, th);
  CHECK(er[0] == doctest::Approx(std::cos(th)).epsilon(1e-12));
  CHECK(er[1] == doctest::Approx(-std::sin(th)).epsilon(1e-12));
  CHECK(er[2] == doctest::Approx(std::sin(th)).epsilon(1e-12));
  CHECK(er[3] == doctest::Approx(std::cos(th)).epsilon(1e-12));
}

TEST_CASE("intermediate field obeys the block-diagonal defect bound") {
  testkit::Rng rng(21);
  PermissibleField F = linear6_field();
  for (int trial = 0; trial < 15; ++trial) {
    const int dw = 2 + int(rng.next() % 3);
    const int dv = 1 + int(rng.next() % (dw - 1));
    auto [v, w] = testkit::random_nested(rng, {0, 1, 2, 3, 4, 5, 6, 7}, dw, dv);
    std::vector<double> c(dw, 0.0), h(dw, 2.0);
    FiniteField full = compress_field(F, w, c, h);
    FiniteField blockdiag = intermediate_field(F, v, w, c, h);
    testkit::Mat diff(dw, dw);
    for (int i = 0; i < dw; ++i)
      for (int j = 0; j < dw; ++j)
        diff(i, j) = full.lin[i * dw + j] - blockdiag.lin[i * dw + j];
    const double lhs = testkit::svd_norm(diff);
    const double rhs =
        commutator_norm(F.L, w) + commutator_norm(F.L, v);
    CHECK(rhs - lhs >= -1e-10);
  }
}

TEST_CASE("nested coordinate frames have no block defect at all") {
  PermissibleField F = linear6_field();
  Frame v = Frame::coordinate_span({0, 1});
  Frame w = Frame::coordinate_span({0, 1, 2, 3});
  FiniteField full = compress_field(F, w, {0, 0, 0, 0}, {2, 2, 2, 2});
  FiniteField blockdiag = intermediate_field(F, v, w, {0, 0, 0, 0}, {2, 2, 2, 2});
  for (int i = 0; i < 16; ++i)
    CHECK(full.lin[i] == doctest::Approx(blockdiag.lin[i]).epsilon(1e-12));
}
