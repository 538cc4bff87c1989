#pragma once

#include <cstdint>
#include <vector>

#include "conley/cubical.hpp"
#include "conley/subspace.hpp"

namespace conley {

// One homology group: free rank plus invariant-factor torsion coefficients
// (each >= 2, in divisibility order).
struct GradedGroup {
  int32_t degree = 0;
  int64_t rank = 0;
  std::vector<int64_t> torsion;
};

// Graded homological data; only nontrivial degrees are stored, sorted.
struct HomologicalIndex {
  std::vector<GradedGroup> groups;

  int64_t rank_at(int32_t degree) const;
  std::vector<int64_t> torsion_at(int32_t degree) const;
  int64_t euler_characteristic() const;  // alternating sum of ranks
  bool trivial() const { return groups.empty(); }

  // Drops trivial entries and sorts by degree; all producers return
  // normalized values, so equality is structural.
  void normalize();
};

bool operator==(const HomologicalIndex& a, const HomologicalIndex& b);
bool operator!=(const HomologicalIndex& a, const HomologicalIndex& b);

// Relative homology over the integers of the cubical pair (|P1|, |P0|).
// Chain generators are the elementary cells of |P1| not contained in |P0|;
// the complex is simplified by free/cofree unit-pivot eliminations (exact
// chain equivalences), then finished by integer Smith normal form.
HomologicalIndex relative_homology(const CombinatorialIndexPair& pair);

// Alternating cell count of the relative complex before any reduction;
// equals the Euler characteristic of the homology, which makes it an
// independent consistency check.
int64_t relative_cell_euler(const CombinatorialIndexPair& pair);

// Index of a nondegenerate linear block: one rank in the degree counting
// the eigendirections the flow expands (negative operator eigenvalues).
// Throws NondegeneracyError when the zero class is nonempty.
HomologicalIndex linear_index_shortcut(const SignatureDecomposition& sig);

// Rational product: ranks convolve across degrees, torsion is dropped.
HomologicalIndex kunneth_product(const HomologicalIndex& a,
                                 const HomologicalIndex& b);

}  // namespace conley
