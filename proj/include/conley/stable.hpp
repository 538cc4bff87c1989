#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "conley/cubical.hpp"
#include "conley/flow.hpp"
#include "conley/homology.hpp"
#include "conley/spectral.hpp"
#include "conley/subspace.hpp"

namespace conley {

// Neighborhood of the origin, intersected with the chosen subspace.  Balls
// are rotation invariant; boxes are interpreted in the eigen-aligned frame
// coordinates the grid ends up using.
struct Neighborhood {
  bool is_ball = true;
  double radius = 0.0;
  std::vector<double> lo, hi;

  static Neighborhood ball(double r);
  static Neighborhood box(std::vector<double> lo, std::vector<double> hi);
  // radius of the smallest origin-centered ball containing the set
  double bounding_radius(int32_t dim) const;

  bool operator==(const Neighborhood&) const = default;
};

struct GridConfig {
  std::vector<int32_t> subdivisions;  // one value replicates over all axes
  int32_t margin = 2;                 // cells kept free around the region
  int32_t max_refinements = 3;

  bool operator==(const GridConfig&) const = default;
};

struct FlowConfig {
  double tau = 1.0;
  double tol = 1e-9;
  double box_scale = 4.0;  // field box half-widths relative to the grid box

  bool operator==(const FlowConfig&) const = default;
};

struct StableEntry {
  int32_t virtual_degree = 0;
  int64_t rank = 0;
  std::vector<int64_t> torsion;

  bool operator==(const StableEntry&) const = default;
};

struct Provenance {
  std::string frame_label;
  int32_t frame_dim = 0;
  std::vector<int32_t> subdivisions;  // at the level that certified
  int32_t refinements = 0;
  double tau = 0.0;
  double tol = 0.0;
  std::string decomposition_label;
};

// Graded index data desuspended by the negative dimension of the
// compressed operator block: entry at virtual degree k - shift carries the
// homology at degree k.
struct StableIndex {
  int32_t shift = 0;
  std::vector<StableEntry> entries;  // sorted, nontrivial only
  Provenance provenance;
};

StableIndex make_stable_index(const HomologicalIndex& h, int32_t shift);

// Graded (rank, torsion) equality across all virtual degrees; provenance
// and shift are bookkeeping and do not participate.
bool stable_equal(const StableIndex& a, const StableIndex& b);

// Same data with every virtual degree raised by k.
StableIndex suspended(const StableIndex& a, int32_t k);

struct AssemblyResult {
  StableIndex index;
  HomologicalIndex homology;
  CombinatorialIndexPair pair;
  OuterMap outer;
  AdmissibilityReport admissibility;
  SignatureDecomposition sig;
  Frame aligned;  // eigen-aligned frame the grid lives on
  CubeSet region;
  int32_t refinements = 0;
};

// Full pipeline on one subspace: admissibility gate, signature, frame
// alignment to the eigenbasis of the compressed operator block, grid,
// outer map, isolation, index pair, relative homology, desuspension.
// Refines the grid (doubling every axis) on isolation or pair failures up
// to max_refinements, then rethrows.
AssemblyResult assemble_stable_index(const PermissibleField& F,
                                     const Neighborhood& X, const Frame& V,
                                     const AdmissibilityBudget& budget,
                                     const GridConfig& grid_cfg,
                                     const FlowConfig& flow_cfg,
                                     std::string frame_label = "");

struct SuspensionReport {
  int32_t u_dim = 0;
  int32_t u_minus = 0;
  bool homology_shift_ok = false;  // H_k on W equals H_{k - u_minus} on V
  bool stable_ok = false;
  bool bookkeeping_ok = false;  // dim V+ + dim U = dim W+ + dim U-
  AssemblyResult on_v, on_w;
  bool ok() const { return homology_shift_ok && stable_ok && bookkeeping_ok; }
};

// V inside W with U the orthocomplement block; requires the compressed
// operator on U to be nondegenerate.
SuspensionReport suspension_consistency(const PermissibleField& F,
                                        const Neighborhood& X, const Frame& V,
                                        const Frame& W,
                                        const AdmissibilityBudget& budget,
                                        const GridConfig& grid_v,
                                        const GridConfig& grid_w,
                                        const FlowConfig& flow_cfg);

struct ShiftReport {
  int32_t shift = 0;  // negative dimension of a's block minus b's
  bool homology_identical = false;
  bool reconciled = false;  // b's stable data equals a's raised by shift
  AssemblyResult on_a, on_b;
  bool ok() const { return homology_identical && reconciled; }
};

// Two decompositions of the same field, compared on one subspace.
ShiftReport decomposition_shift(const PermissibleField& a,
                                const PermissibleField& b,
                                const Neighborhood& X, const Frame& V,
                                const AdmissibilityBudget& budget,
                                const GridConfig& grid_cfg,
                                const FlowConfig& flow_cfg);

struct ContinuationStep {
  double s = 0.0;
  bool isolated = false;
  int64_t invariant_cubes = 0;
};

struct ContinuationReport {
  double rho = 0.0;  // decomposition pseudometric between the ends
  std::vector<ContinuationStep> steps;
  AssemblyResult start, end;
  bool ends_equal = false;
};

// Sweeps the linear homotopy between the two compressed fields over
// `steps` parameter values, checking isolation at each; assembles and
// compares the end indices.  Throws ContinuationBreakError with the
// bracketing parameters when isolation is lost.
ContinuationReport continuation_check(const PermissibleField& a,
                                      const PermissibleField& b,
                                      const Neighborhood& X, const Frame& V,
                                      int32_t steps, double rho_limit,
                                      const AdmissibilityBudget& budget,
                                      const GridConfig& grid_cfg,
                                      const FlowConfig& flow_cfg);

}  // namespace conley
