#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "conley/decay.hpp"
#include "conley/frame.hpp"
#include "conley/poly.hpp"
#include "conley/vec.hpp"

namespace conley {

// C1 radial cutoff: 1 on [0, r_cut], 0 on [2*r_cut, inf), cubic smoothstep
// between.  Slope is bounded by 1.5/r_cut.
double cutoff_chi(double r, double r_cut);
double cutoff_slope_bound(double r_cut);

// Bounded self-adjoint operator with Fredholm structure: a finite symmetric
// core block on coordinates [0, core_dim) and a diagonal tail.  The tail
// eigenvalue at coordinate number k = i+1 > core_dim is tail_plus for even
// k and tail_minus for odd k (or tail_plus everywhere when single_tail),
// plus an optional decaying modifier.  Kernel coordinates belong in the
// core block, placed first, so coordinate ladders contain the kernel.
struct SpectralOperator {
  int32_t core_dim = 0;
  std::vector<double> core;  // row-major core_dim x core_dim, symmetric
  double tail_plus = 1.0;
  double tail_minus = -1.0;
  bool single_tail = false;
  DecayRule tail_modifier;
  double spectral_gap = 0.0;  // certified distance from 0 to nonzero spectrum

  // Builds the core from a diagonal plus an optional symmetric perturbation
  // (checked symmetric within 1e-12), validates the Fredholm structure and
  // derives the spectral gap; a declared gap is accepted only if it does
  // not exceed the derived one.
  static SpectralOperator make(const std::vector<double>& core_diagonal,
                               const std::vector<double>& core_perturbation,
                               double tail_plus, double tail_minus,
                               bool single_tail,
                               std::optional<double> declared_gap = {});

  double tail_at(int32_t i) const;  // requires i >= core_dim
  Vec apply(const Vec& x) const;
  double op_norm_upper() const;
  std::vector<double> core_eigenvalues() const;  // ascending
  int32_t kernel_dim() const;
};

// Compact locally Lipschitz map with explicit structure:
//   Q(x) = chi(||x||) * P(x)  +  A x  +  diag(kappa) x
// where P is a polynomial map writing into finitely many coordinates,
// chi the radial cutoff, A a finite symmetric block (used by decomposition
// moves), and kappa a decaying diagonal rule.  The cut-off polynomial part
// is globally bounded; the linear part is compact by decay of kappa and
// finiteness of A.
struct StructuredCompactMap {
  std::vector<int32_t> input_support;
  std::vector<std::pair<int32_t, Poly>> components;  // sorted by output index
  double cutoff_radius = 0.0;
  DecayRule diagonal_compact;
  std::vector<double> linear_block;  // row-major, symmetric
  int32_t linear_block_dim = 0;

  static StructuredCompactMap zero();
  static StructuredCompactMap make(std::vector<int32_t> input_support,
                                   std::vector<std::pair<int32_t, Poly>> comps,
                                   double cutoff_radius,
                                   DecayRule diagonal_compact = {});

  bool trivial() const;
  Vec eval(const Vec& x) const;

  // Certified sup of ||chi * P|| over the closed ball of radius r.
  double poly_sup_ball(double r) const;
  double global_poly_bound() const;   // sup over all of H
  double linear_norm_upper() const;   // ||A + diag(kappa)||, certified upper
  std::vector<int32_t> output_indices() const;
  int32_t structure_extent() const;  // max index touched by block/outputs
};

// F = L + Q together with a growth witness (c1, c2) for
// ||Q(x)|| <= c1 ||x|| + c2 / (1 + ||x||).
struct PermissibleField {
  SpectralOperator L;
  StructuredCompactMap Q;
  double c1 = 0.0;
  double c2 = 0.0;

  // Default witness: c1 = ||A + diag(kappa)|| + B, c2 = 2B with B the
  // global bound of the cut-off polynomial part; reduces to (B, 2B) when
  // the linear part vanishes.
  static PermissibleField make(SpectralOperator L, StructuredCompactMap Q);
  static PermissibleField make_with_witness(SpectralOperator L,
                                            StructuredCompactMap Q, double c1,
                                            double c2);
};

Vec apply_field(const PermissibleField& f, const Vec& x);

// Orthonormal eigenframe of ker L (empty frame when L is injective).
Frame kernel_frame(const SpectralOperator& L);

// Symmetric compact perturbation usable as a decomposition move:
// K = block (on coordinates [0, block_dim)) + diag(diagonal).
struct CompactPerturbation {
  std::vector<double> block;  // row-major block_dim x block_dim
  int32_t block_dim = 0;
  DecayRule diagonal;

  Vec apply(const Vec& x) const;
};

// Same field, shifted decomposition: (L + K, Q - K).  The sum is preserved
// exactly; the new operator re-validates its Fredholm structure.
PermissibleField alternative_decomposition(const PermissibleField& f,
                                           const CompactPerturbation& K);

struct GrowthCheck {
  bool ok = false;
  double worst_violation = 0.0;  // max of ||Q(x)|| - c1||x|| - c2/(1+||x||)
  double worst_radius = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
};

// Deterministic sampled check of the stored growth witness over radii in
// [0, 4 * max(cutoff_radius, 1)].
GrowthCheck verify_growth_bound(const PermissibleField& f, int n_samples = 10000);

}  // namespace conley
