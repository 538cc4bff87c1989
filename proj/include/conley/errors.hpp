#pragma once

#include <stdexcept>
#include <string>

namespace conley {

// Error taxonomy.  Every failure mode the pipeline can signal deliberately
// has its own type so callers (and the CLI) can map them to exit codes and
// structured report entries instead of parsing message strings.

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input rejected before any computation started (bad file, bad section,
// inconsistent dimensions, missing cutoff, non-orthonormal frame...).
struct ValidationError : Error {
  using Error::Error;
};

// Problem-file syntax error; carries the location that failed.
struct ParseError : ValidationError {
  ParseError(const std::string& msg, int line)
      : ValidationError("line " + std::to_string(line) + ": " + msg),
        line_number(line) {}
  int line_number;
};

// A subspace failed the admissibility budget.
struct AdmissibilityError : Error {
  using Error::Error;
};

// A compressed operator block is degenerate at the configured tolerance.
struct NondegeneracyError : Error {
  using Error::Error;
};

// The combinatorial invariant set touches the neighborhood boundary at the
// maximum refinement level.
struct IsolationError : Error {
  using Error::Error;
};

// Index-pair verification failed; the caller should subdivide the grid.
struct RefineError : Error {
  using Error::Error;
};

// A trajectory left the stated box of a finite field.
struct BoxExitError : Error {
  BoxExitError(const std::string& msg, double lo, double hi)
      : Error(msg), t_lo(lo), t_hi(hi) {}
  double t_lo;  // last time inside the box
  double t_hi;  // first time observed outside
};

// An isolation or index breakdown inside a homotopy sweep; carries the
// parameter bracket where the family stops being continuable.
struct ContinuationBreakError : Error {
  ContinuationBreakError(const std::string& msg, double lo, double hi)
      : Error(msg), s_lo(lo), s_hi(hi) {}
  double s_lo;
  double s_hi;
};

}  // namespace conley
