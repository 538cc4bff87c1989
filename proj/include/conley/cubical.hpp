#pragma once

#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

#include "conley/flow.hpp"
#include "conley/frame.hpp"

namespace conley {

// Cube sets are sorted vectors of linear cube ids; all set algebra keeps
// them sorted, which makes every downstream artifact deterministic.
using CubeSet = std::vector<int64_t>;

bool cube_set_contains(const CubeSet& s, int64_t id);

// Uniform cubical grid over a box in frame coordinates.  Cubes are integer
// multi-indices, linearized row-major.
struct CubicalGrid {
  Frame frame;
  std::vector<double> center;
  std::vector<double> half;
  std::vector<int32_t> dims;  // subdivisions per axis, powers of two >= 8

  static CubicalGrid make(Frame frame, std::vector<double> center,
                          std::vector<double> half, std::vector<int32_t> dims);

  int32_t dim() const { return frame.dim; }
  int64_t total_cubes() const;
  double cell_width(int32_t axis) const;
  double cell_diameter() const;

  int64_t id_of(const std::vector<int32_t>& multi) const;
  std::vector<int32_t> multi_of(int64_t id) const;
  std::vector<double> cube_center(const std::vector<int32_t>& multi) const;

  // All cubes whose closed box meets the closed ball / box (frame coords).
  CubeSet cubes_meeting_ball(double radius) const;
  CubeSet cubes_meeting_box(const std::vector<double>& lo,
                            const std::vector<double>& hi) const;
};

// Per-axis inclusive cube index ranges covering one cube's inflated image
// box, clipped to the grid; outside is set when the box leaves the grid.
struct ImageRange {
  std::vector<int32_t> lo, hi;
  bool outside = false;
};

// Outer approximation of the time-tau flow of v' = -f(v) on the grid.
// Each cube's image is the set of cubes meeting the box
//   flow(center) +- ( exp(tau G) (w/2) + exp(tau Ghat) r_enc 1 )
// where G is the componentwise variational comparison matrix of the field
// over its stated box, Ghat is G with its diagonal clamped at zero (local
// integration error can be injected at any time in [0, tau], so its
// propagation factor must dominate every partial horizon), and w is the
// cell width vector.  The comparison bound makes contracting axes contract
// in the image, which is what lets index pairs certify at fixed tau.
// Images are computed lazily and memoized; a trajectory leaving the
// field's stated box yields the OUTSIDE edge instead of an error.
struct OuterMap {
  FiniteField field;
  CubicalGrid grid;
  double tau = 0.0;
  double tol = 0.0;
  std::vector<double> bloat_halfw;  // exp(tau G) (w/2)
  std::vector<double> exp_ghat;     // dim x dim

  const ImageRange& image(int64_t cube) const;
  void for_each_image(const ImageRange& r,
                      const std::function<void(int64_t)>& fn) const;
  CubeSet image_set(const CubeSet& cubes) const;  // in-grid images, sorted

 private:
  mutable std::unordered_map<int64_t, ImageRange> memo_;
  mutable Workspace ws_;
};

OuterMap build_outer_map(const FiniteField& f, const CubicalGrid& grid,
                         double tau, double tol);

// Maximal subset of region with an infinite forward and an infinite
// backward path inside region, via strongly connected components.
CubeSet invariant_part(const OuterMap& m, const CubeSet& region);

struct IsolationReport {
  bool ok = false;
  CubeSet s;          // the combinatorial invariant set of region
  CubeSet offending;  // one-layer neighbors of s escaping the interior
};

// True iff s grown by one layer of face/corner neighbors stays inside
// region minus region's own boundary layer.
IsolationReport check_isolation(const OuterMap& m, const CubeSet& region);

struct CombinatorialIndexPair {
  CubicalGrid grid;
  CubeSet p1;
  CubeSet p0;  // p0 = p1 minus the invariant set
  CubeSet s;
};

struct PairCheck {
  bool disjoint = false;        // s and p0 share no cube
  bool positively_invariant = false;  // images of p0 meet p1 only inside p0
  bool exit_through_p0 = false;  // images of s stay inside p1, never outside
  bool ok() const { return disjoint && positively_invariant && exit_through_p0; }
};

// Construction-independent verification of the three index-pair axioms.
PairCheck verify_index_pair(const OuterMap& m,
                            const CombinatorialIndexPair& pair);

// P1 = S united with every in-grid image cube of S, P0 = P1 minus S.  With
// S maximal invariant in region, images of P0's in-region cubes cannot
// re-enter S, and images of S stay in P1 by construction, so the axioms
// hold whenever the one-step collar narrative holds at all; they are still
// re-verified and RefineError is thrown on any failure.
CombinatorialIndexPair build_index_pair(const OuterMap& m,
                                        const CubeSet& region);

// (N1 x N2, N1 x L2 union L1 x N2) on the product grid; frames must have
// disjoint supports.
CombinatorialIndexPair product_index_pair(const CombinatorialIndexPair& p,
                                          const CombinatorialIndexPair& q);

}  // namespace conley
