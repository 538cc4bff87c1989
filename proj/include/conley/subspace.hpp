#pragma once

#include <cstdint>
#include <vector>

#include "conley/frame.hpp"
#include "conley/spectral.hpp"

namespace conley {

// Tolerance for kernel containment: each kernel basis vector k must satisfy
// ||(1 - pi_V) k|| <= kKernelTol for V to be admissible.
inline constexpr double kKernelTol = 1e-9;

struct SignatureDecomposition {
  Frame v;
  Frame v_plus;
  Frame v_minus;
  Frame v_zero;
  std::vector<double> eigen_plus;
  std::vector<double> eigen_minus;
  std::vector<double> eigen_zero;
  // min |eigenvalue| over the plus and minus classes; +inf when both empty
  double margin = 0.0;
};

struct AdmissibilityBudget {
  double c1 = 0.0;
  double c2 = 0.0;
  double degeneracy_tol = 0.0;

  static AdmissibilityBudget make(double c1, double c2, double degeneracy_tol);
};

struct AdmissibilityReport {
  bool ok = false;
  bool kernel_ok = false;
  bool commutator_ok = false;
  bool residual_ok = false;
  double kernel_defect = 0.0;
  double commutator = 0.0;
  double residual_upper = 0.0;
  double residual_lower = 0.0;
};

struct ResidualBound {
  double upper = 0.0;
  double lower = 0.0;
};

// Exact operator norm of L pi_V - pi_V L. The commutator vanishes outside
// the span of V.support united with the core coordinates, so the finite
// window computation is exact, not an approximation.
double commutator_norm(const SpectralOperator& L, const Frame& V);

// Certified upper bound and sampled lower bound for
// sup over the ball of radius r_x of ||(1 - pi_V) Q x||.
ResidualBound residual_compact_norm(const StructuredCompactMap& Q,
                                    const Frame& V, double r_x);

// Eigen-decomposition of the compressed bilinear form pi_V L restricted to V,
// classified by sign against degeneracy_tol. With require_nondegenerate set,
// throws NondegeneracyError when the zero class is nonempty.
SignatureDecomposition signature(const SpectralOperator& L, const Frame& V,
                                 double degeneracy_tol,
                                 bool require_nondegenerate = false);

// Decision record: kernel containment, commutator budget, residual budget.
// Never throws; the caller inspects the report.
AdmissibilityReport admissible(const PermissibleField& f, const Frame& V,
                               double r_x, const AdmissibilityBudget& budget);

// V_k = span{e_0, ..., e_{k-1}} for k = 1..n_max. Verifies that the
// commutator vanishes once the core is contained and that projections
// converge pointwise on a fixed finite test set.
std::vector<Frame> build_coordinate_ladder(const PermissibleField& f,
                                           int32_t n_max);

// Smallest enlargement E of W along the ladder with commutator_norm < eps,
// verified post-hoc. E always contains W exactly.
Frame extend_subspace(const SpectralOperator& L, const Frame& W, double eps,
                      const std::vector<Frame>& ladder);

}  // namespace conley
