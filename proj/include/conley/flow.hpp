#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "conley/frame.hpp"
#include "conley/poly.hpp"
#include "conley/spectral.hpp"

namespace conley {

// Cut-off polynomial block of a finite field.  The block evaluates
//   chi(r) * proj * [ P_o(C v) ]_o      with r = |v| over norm_coords,
// where C is the field's frame.  Products of fields keep one block per
// factor, each reading only its factor's coordinates, so the product flow
// is exactly the componentwise flow.
struct CutGroup {
  double cutoff_radius = 0.0;
  std::vector<int32_t> norm_coords;  // frame coordinates; empty means all
  std::vector<std::pair<int32_t, Poly>> components;  // ambient output, poly
  std::vector<double> proj;  // dim x n_comp, row-major

  // derived evaluation data, filled by the field constructors
  std::vector<int32_t> vars;     // ambient variables the polys read
  std::vector<double> var_rows;  // n_vars x dim; value of var = row . v
  std::vector<Poly> packed;      // components remapped to var slots
};

// Scratch buffers reused across evaluations and integration steps.
struct Workspace {
  std::vector<double> vals, sub;
  std::vector<double> k1, k2, k3, k4, st, y1, yh, y2, diff;
};

// Compression of a permissible field to a finite frame.  All linear parts
// (the Fredholm operator and the compact linear pieces) are folded into
// one matrix in frame coordinates; the cut-off polynomial part stays
// structured so derivative and sup bounds are certified.  lip_bound and
// norm_bound hold on the stated box.
struct FiniteField {
  Frame frame;
  std::vector<double> lin;  // dim x dim, row-major, frame coordinates
  std::vector<CutGroup> groups;
  std::vector<double> box_center;  // frame coordinates
  std::vector<double> box_half;
  double lip_bound = 0.0;
  double norm_bound = 0.0;

  int32_t dim() const { return frame.dim; }
  void eval(std::span<const double> v, std::span<double> out,
            Workspace& ws) const;
  bool in_box(std::span<const double> v, double slack = 0.0) const;
};

struct FlowStep {
  std::vector<double> start;  // frame coordinates
  double tau = 0.0;
  std::vector<double> end;
  double r_enc = 0.0;  // certified enclosure radius around end
};

// pi_V F restricted to V, in frame coordinates, with certification box.
FiniteField compress_field(const PermissibleField& F, const Frame& V,
                           std::vector<double> box_center,
                           std::vector<double> box_half);

// Field on W in upper-triangular block form: the V-compression of the
// linear part, the orthocomplement compression of the linear part, and Q
// projected onto V.  Requires V contained in W.
FiniteField intermediate_field(const PermissibleField& F, const Frame& V,
                               const Frame& W, std::vector<double> box_center,
                               std::vector<double> box_half);

// ||L_a - L_b|| + sup over the ball of radius r_x of ||(Q_a - Q_b) x||.
// Certified upper bound; structurally identical parts cancel exactly.
double decomposition_pseudometric(const PermissibleField& a,
                                  const PermissibleField& b, double r_x);

// Integrates v' = -f(v) from x over [0, tau] with step-doubling adaptive
// RK4; the local error budget is distributed proportionally to step
// length.  r_enc = accumulated local error * exp(lip_bound * tau).
// Throws BoxExitError (with a time bracket) when an accepted point leaves
// the stated box.
FlowStep time_tau_map(const FiniteField& f, std::span<const double> x,
                      double tau, double tol);

// (1-s) a + s b on a shared frame and box; bounds combine linearly.
FiniteField homotopy_family(const FiniteField& a, const FiniteField& b,
                            double s);

// Componentwise field on the direct sum of two disjointly supported
// frames; the flow of the product is the product of the flows.
FiniteField product_field(const FiniteField& a, const FiniteField& b);

// Componentwise variational bound for the integrated flow v' = -f(v):
//   G_ii = sup over the box of -d f_i / d v_i,
//   G_ij = sup over the box of |d f_i / d v_j|   (i != j).
// Two trajectories staying in the box satisfy, componentwise,
// |delta(t)| <= exp(t G) |delta(0)|.
std::vector<double> comparison_matrix(const FiniteField& f);

// exp(t M) by scaling and squaring with a fixed evaluation order.
std::vector<double> mat_exp(const std::vector<double>& m, int32_t d, double t);

}  // namespace conley
