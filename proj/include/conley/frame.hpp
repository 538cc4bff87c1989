#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "conley/vec.hpp"

namespace conley {

// Orthonormal frame for a finite-dimensional subspace of the ambient space.
// Columns are expressed on a finite support of ambient coordinates:
// cols is row-major |support| x dim, column j spanning the subspace
// direction sum_r cols[r][j] e_{support[r]}.  Orthonormality is validated
// at construction and never silently repaired.
struct Frame {
  std::vector<int32_t> support;  // sorted, distinct ambient indices
  int32_t dim = 0;
  std::vector<double> cols;

  static constexpr double kOrthTol = 1e-12;

  static Frame coordinate_span(std::vector<int32_t> indices);
  // Validates orthonormality within tol; throws ValidationError otherwise.
  static Frame from_columns(std::vector<int32_t> support,
                            std::vector<double> cols, int32_t dim,
                            double tol = kOrthTol);
  // Deterministic (modified, twice-iterated) Gram-Schmidt; directions whose
  // residual norm falls below drop_tol are dropped.
  static Frame orthonormalized(const std::vector<Vec>& raw,
                               double drop_tol = 1e-10);

  double orth_defect() const;  // max |C^T C - I|_ij
  Vec column(int32_t j) const;
  std::vector<Vec> columns() const;

  std::vector<double> to_coords(const Vec& x) const;  // C^T x
  Vec from_coords(std::span<const double> v) const;   // C v
  Vec project(const Vec& x) const;                    // C C^T x
  double project_defect(const Vec& x) const;          // ||x - proj(x)||

  // True when every column of sub is fixed by this frame's projection
  // within tol.
  bool contains(const Frame& sub, double tol = 1e-9) const;

  // New frame spanning the same subspace with columns mixed by the
  // column-orthonormal dim x new_dim matrix R (row-major).
  Frame mixed(std::span<const double> R, int32_t new_dim) const;
};

}  // namespace conley
