#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "conley/cubical.hpp"
#include "conley/errors.hpp"
#include "oracles.hpp"

using namespace conley;

namespace {

PermissibleField diag_field(std::vector<double> core) {
  return PermissibleField::make(
      SpectralOperator::make(core, {}, 1.0, -1.0, false),
      StructuredCompactMap::zero());
}

struct Setup {
  FiniteField field;
  CubicalGrid grid;
  OuterMap map;
};

Setup make_setup(const PermissibleField& F, std::vector<int32_t> coords,
                 double grid_half, int32_t cells, double tau = 0.5) {
  Frame v = Frame::coordinate_span(coords);
  const int d = v.dim;
  std::vector<double> c(d, 0.0), gh(d, grid_half), fh(d, 4.0 * grid_half);
  FiniteField f = compress_field(F, v, c, fh);
  CubicalGrid g = CubicalGrid::make(v, c, gh, std::vector<int32_t>(d, cells));
  OuterMap m = build_outer_map(f, g, tau, 1e-9);
  return {std::move(f), std::move(g), std::move(m)};
}

}  // namespace

TEST_CASE("grid indexing round-trips and measures cells") {
  CubicalGrid g = CubicalGrid::make(Frame::coordinate_span({0, 1}),
                                    {0.0, 0.0}, {1.0, 2.0}, {8, 16});
  CHECK(g.total_cubes() == 128);
  CHECK(g.cell_width(0) == doctest::Approx(0.25));
  CHECK(g.cell_width(1) == doctest::Approx(0.25));
  CHECK(g.cell_diameter() ==
        doctest::Approx(std::sqrt(2.0) * 0.25).epsilon(1e-12));
  for (int64_t id = 0; id < g.total_cubes(); ++id) {
    auto multi = g.multi_of(id);
    CHECK(g.id_of(multi) == id);
  }
  auto ctr = g.cube_center({0, 0});
  CHECK(ctr[0] == doctest::Approx(-1.0 + 0.125));
  CHECK(ctr[1] == doctest::Approx(-2.0 + 0.125));
  CHECK_THROWS_AS(CubicalGrid::make(Frame::coordinate_span({0}), {0.0}, {1.0},
                                    {12}),
                  ValidationError);
  CHECK_THROWS_AS(CubicalGrid::make(Frame::coordinate_span({0}), {0.0}, {1.0},
                                    {4}),
                  ValidationError);
}

TEST_CASE("ball and box cube queries match the direct distance test") {
  CubicalGrid g = CubicalGrid::make(Frame::coordinate_span({0, 1}),
                                    {0.0, 0.0}, {1.5, 1.5}, {16, 16});
  const double r = 1.0;
  CubeSet ball = g.cubes_meeting_ball(r);
  CubeSet want;
  for (int64_t id = 0; id < g.total_cubes(); ++id) {
    auto multi = g.multi_of(id);
    auto c = g.cube_center(multi);
    double d2 = 0.0;
    for (int a = 0; a < 2; ++a) {
      const double w = g.cell_width(a) / 2.0;
      const double gap = std::max(0.0, std::fabs(c[a]) - w);
      d2 += gap * gap;
    }
    if (d2 <= r * r + 1e-12) want.push_back(id);
  }
  CHECK(ball == want);

  CubeSet box = g.cubes_meeting_box({-0.4, 0.1}, {0.2, 0.9});
  CubeSet want_box;
  for (int64_t id = 0; id < g.total_cubes(); ++id) {
    auto multi = g.multi_of(id);
    auto c = g.cube_center(multi);
    bool hit = true;
    const double lo[2] = {-0.4, 0.1}, hi[2] = {0.2, 0.9};
    for (int a = 0; a < 2; ++a) {
      const double w = g.cell_width(a) / 2.0;
      if (c[a] + w < lo[a] - 1e-12 || c[a] - w > hi[a] + 1e-12) hit = false;
    }
    if (hit) want_box.push_back(id);
  }
  CHECK(box == want_box);
}

TEST_CASE("outer map images enclose sampled true trajectories") {
  Setup s = make_setup(diag_field({1.0}), {0}, 1.5, 16);
  CubeSet region = s.grid.cubes_meeting_ball(1.0);
  testkit::Rng rng(17);
  for (int64_t c : region) {
    const ImageRange& r = s.map.image(c);
    CubeSet targets = s.map.image_set({c});
    auto center = s.grid.cube_center(s.grid.multi_of(c));
    const double w = s.grid.cell_width(0);
    for (int k = 0; k < 5; ++k) {
      std::vector<double> p = {center[0] + 0.49 * w * rng.sym()};
      FlowStep step = time_tau_map(s.field, p, s.map.tau, s.map.tol);
      const double lo = s.grid.center[0] - s.grid.half[0];
      const int32_t cell = int32_t((step.end[0] - lo) / w);
      if (step.end[0] < lo || cell >= s.grid.dims[0]) {
        CHECK(r.outside);
      } else {
        const int64_t target = s.grid.id_of({cell});
        const bool covered = cube_set_contains(targets, target) || r.outside;
        CHECK(covered);
      }
    }
  }
}

TEST_CASE("invariant part matches the trim-to-fixpoint reference") {
  SUBCASE("one-dimensional attractor") {
    Setup s = make_setup(diag_field({1.0}), {0}, 1.5, 16);
    CubeSet region = s.grid.cubes_meeting_ball(1.0);
    CubeSet inv = invariant_part(s.map, region);
    CHECK(inv == testkit::brute_invariant(s.map, region));
    CHECK_FALSE(inv.empty());
    for (int64_t c : inv) CHECK(cube_set_contains(region, c));
  }
  SUBCASE("two-dimensional saddle") {
    Setup s = make_setup(diag_field({1.0, -1.0}), {0, 1}, 1.5, 16);
    CubeSet region = s.grid.cubes_meeting_box({-1, -1}, {1, 1});
    CubeSet inv = invariant_part(s.map, region);
    CHECK(inv == testkit::brute_invariant(s.map, region));
    CHECK_FALSE(inv.empty());
  }
  SUBCASE("equilibrium outside the region leaves nothing invariant") {
    // constant drift: F = v - 3, equilibrium far beyond the grid, so every
    // image lands strictly right of its source and nothing recurs
    Poly c = Poly::constant(-3.0);
    PermissibleField F = PermissibleField::make(
        SpectralOperator::make({1.0}, {}, 1.0, -1.0, false),
        StructuredCompactMap::make({0}, {{0, c}}, 6.0));
    Setup s = make_setup(F, {0}, 1.5, 16);
    CubeSet region = s.grid.cubes_meeting_ball(1.0);
    CubeSet inv = invariant_part(s.map, region);
    CHECK(inv == testkit::brute_invariant(s.map, region));
    CHECK(inv.empty());
  }
}

TEST_CASE("isolation holds for an interior attractor and carries its set") {
  Setup s = make_setup(diag_field({1.0}), {0}, 1.5, 16);
  CubeSet region = s.grid.cubes_meeting_ball(1.0);
  IsolationReport rep = check_isolation(s.map, region);
  CHECK(rep.ok);
  CHECK_FALSE(rep.s.empty());
  CHECK(rep.offending.empty());
}

TEST_CASE("a region hugging its invariant set is not isolating") {
  Setup s = make_setup(diag_field({1.0}), {0}, 1.5, 16);
  CubeSet region = s.grid.cubes_meeting_ball(1.0);
  CubeSet inv = invariant_part(s.map, region);
  REQUIRE_FALSE(inv.empty());
  IsolationReport rep = check_isolation(s.map, inv);
  CHECK_FALSE(rep.ok);
  CHECK_FALSE(rep.offending.empty());
}

TEST_CASE("growth off the grid edge reports the sentinel") {
  // stationary field: every cube is invariant, including the grid edge
  Setup s = make_setup(diag_field({0.0}), {0}, 1.5, 16);
  CubeSet region;
  for (int64_t id = 0; id < s.grid.total_cubes(); ++id) region.push_back(id);
  IsolationReport rep = check_isolation(s.map, region);
  CHECK_FALSE(rep.ok);
  CHECK(cube_set_contains(rep.offending, -1));
}

TEST_CASE("built index pairs satisfy all three axioms") {
  Setup s = make_setup(diag_field({1.0, -1.0}), {0, 1}, 1.5, 16);
  CubeSet region = s.grid.cubes_meeting_box({-1, -1}, {1, 1});
  CombinatorialIndexPair pair = build_index_pair(s.map, region);
  CHECK_FALSE(pair.s.empty());
  CHECK_FALSE(pair.p1.empty());

  PairCheck check = verify_index_pair(s.map, pair);
  CHECK(check.disjoint);
  CHECK(check.positively_invariant);
  CHECK(check.exit_through_p0);
  CHECK(check.ok());

  // p0 is p1 minus s, exactly
  CubeSet diff;
  std::set_difference(pair.p1.begin(), pair.p1.end(), pair.s.begin(),
                      pair.s.end(), std::back_inserter(diff));
  CHECK(pair.p0 == diff);

  // every s cube image stays inside p1
  for (int64_t c : pair.s) {
    CHECK_FALSE(s.map.image(c).outside);
    for (int64_t t : s.map.image_set({c}))
      CHECK(cube_set_contains(pair.p1, t));
  }
}

TEST_CASE("corrupted pairs fail verification") {
  Setup s = make_setup(diag_field({1.0, -1.0}), {0, 1}, 1.5, 16);
  CubeSet region = s.grid.cubes_meeting_box({-1, -1}, {1, 1});
  CombinatorialIndexPair pair = build_index_pair(s.map, region);

  CombinatorialIndexPair overlap = pair;
  overlap.p0.push_back(pair.s.front());
  std::sort(overlap.p0.begin(), overlap.p0.end());
  CHECK_FALSE(verify_index_pair(s.map, overlap).disjoint);

  // every exit-set cube is an image of s; dropping one from the pair makes
  // some invariant cube's image escape p1
  CombinatorialIndexPair shrunk = pair;
  CubeSet image_of_s = s.map.image_set(pair.s);
  int64_t victim = -1;
  for (int64_t c : pair.p0)
    if (cube_set_contains(image_of_s, c)) victim = c;
  REQUIRE(victim >= 0);
  shrunk.p1.erase(std::find(shrunk.p1.begin(), shrunk.p1.end(), victim));
  shrunk.p0.erase(std::find(shrunk.p0.begin(), shrunk.p0.end(), victim));
  CHECK_FALSE(verify_index_pair(s.map, shrunk).exit_through_p0);
}

TEST_CASE("product pairs follow the two-factor formula") {
  Setup sa = make_setup(diag_field({-1.0}), {0}, 0.75, 16);
  CubeSet ra = sa.grid.cubes_meeting_ball(0.5);
  CombinatorialIndexPair pa = build_index_pair(sa.map, ra);
  REQUIRE_FALSE(pa.p0.empty());  // repeller exits through both ends

  Setup sb = make_setup(diag_field({1.0, 1.0}), {1}, 0.75, 16);
  CubeSet rb = sb.grid.cubes_meeting_ball(0.5);
  CombinatorialIndexPair pb = build_index_pair(sb.map, rb);
  CHECK(pb.p0.empty());  // attractor has an empty exit set

  CombinatorialIndexPair prod = product_index_pair(pa, pb);
  CHECK(prod.grid.dim() == 2);
  CHECK((int64_t)prod.p1.size() == (int64_t)pa.p1.size() * (int64_t)pb.p1.size());
  const int64_t want_p0 =
      (int64_t)pa.p1.size() * (int64_t)pb.p0.size() +
      (int64_t)pa.p0.size() * (int64_t)pb.p1.size() -
      (int64_t)pa.p0.size() * (int64_t)pb.p0.size();
  CHECK((int64_t)prod.p0.size() == want_p0);

  // identical supports are rejected
  CHECK_THROWS_AS(product_index_pair(pa, pa), ValidationError);
}

TEST_CASE("images that leave the grid set the outside flag") {
  // expanding flow: the rightmost cube flows past the grid edge
  Setup s = make_setup(diag_field({-1.0}), {0}, 1.5, 16, 1.0);
  const ImageRange& r = s.map.image(s.grid.id_of({15}));
  CHECK(r.outside);
}
