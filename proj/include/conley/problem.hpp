#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "conley/frame.hpp"
#include "conley/poly.hpp"
#include "conley/spectral.hpp"
#include "conley/stable.hpp"
#include "conley/subspace.hpp"

namespace conley {

// Explicit non-coordinate subspace: orthonormal columns over a coordinate
// support, row r of `rows` giving the coefficients of every column on
// ambient coordinate support[r].
struct RotatedFrameSpec {
  std::string label;
  std::vector<int32_t> support;
  int32_t dim = 0;
  std::vector<double> rows;  // row-major |support| x dim

  bool operator==(const RotatedFrameSpec&) const = default;
};

// Complete textual description of one computation: the field F = L + Q,
// the neighborhood X, the subspaces to run, and the numerical budgets.
// Parsed from an INI-style file; see the grammar in README.md.
struct ProblemSpec {
  // [operator]
  std::vector<double> core_diagonal;
  std::vector<double> core_perturbation;  // row-major n x n, may be empty
  double tail_plus = 1.0;
  double tail_minus = -1.0;
  bool single_tail = false;
  std::optional<double> declared_gap;

  // [nonlinearity] (absent section leaves Q = 0)
  std::vector<int32_t> input_support;
  std::vector<std::pair<int32_t, Poly>> components;
  double cutoff_radius = 0.0;
  DecayRule diagonal_compact;

  // [neighborhood]
  Neighborhood neighborhood = Neighborhood::ball(1.0);

  // [subspaces]
  std::vector<int32_t> ladder;
  std::vector<RotatedFrameSpec> rotated;

  // [budgets]
  double budget_c1 = 0.0;
  double budget_c2 = 0.0;
  double degeneracy_tol = 1e-9;

  // [grid], [flow]
  GridConfig grid;
  FlowConfig flow;

  bool operator==(const ProblemSpec&) const = default;

  PermissibleField field() const;
  AdmissibilityBudget budget() const;
  // Ladder frames labeled "V<dim>" followed by the rotated frames.
  std::vector<std::pair<std::string, Frame>> frames() const;
};

// Throws ParseError with a line number on malformed input.  Performs no
// semantic checks beyond what the value syntax forces.
ProblemSpec parse_problem(std::string_view text);

// Reads and parses a file; throws Error when unreadable.
ProblemSpec load_problem(const std::string& path);

// Collects every violated invariant and throws ValidationError listing
// them all; returns normally on a well-formed spec.
void validate_problem(const ProblemSpec& spec);

// Canonical lossless rendering: parse_problem(serialize_problem(s)) == s.
std::string serialize_problem(const ProblemSpec& spec);

}  // namespace conley
