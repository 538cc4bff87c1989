#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "conley/problem.hpp"
#include "conley/stable.hpp"
#include "conley/subspace.hpp"

namespace conley {

// Everything one subspace contributes to a report.  Cube id lists are kept
// only for two-dimensional frames, where they feed the phase portrait.
struct FrameOutcome {
  std::string label;
  int32_t dim = 0;
  bool ok = false;
  std::string error;      // failure description when !ok
  bool cache_hit = false;  // never serialized; stderr accounting only

  AdmissibilityReport admissibility;
  std::vector<double> block_spectrum;  // compressed block, ascending
  int32_t shift = 0;
  std::vector<StableEntry> entries;
  int32_t refinements = 0;
  std::vector<int32_t> subdivisions;
  int64_t region_cubes = 0;
  int64_t invariant_cubes = 0;
  int64_t p1_cubes = 0;
  int64_t p0_cubes = 0;
  std::vector<double> box_center, box_half;  // grid box, aligned coords
  std::vector<int32_t> grid_dims;
  std::vector<int64_t> p1_ids, p0_ids;  // dim == 2 only
};

struct RunReport {
  std::string problem_label;
  std::string content_hash;  // of the canonical problem serialization
  std::vector<FrameOutcome> frames;
  // equal[i][j]: 1 same stable data, 0 different, -1 not comparable
  std::vector<std::vector<int8_t>> equal;
};

// Runs every frame of the problem, recording failures per frame and
// continuing.  Results are cached under $CONLEY_CACHE_DIR keyed by the
// content hash of the problem restricted to that frame; cache traffic is
// reported on stderr and never changes report bytes.
RunReport run_ladder(const ProblemSpec& spec, const std::string& label);

struct SweepReport {
  std::string problem_label;
  double rho = 0.0;
  int32_t steps = 0;
  bool completed = false;
  double break_lo = 0.0, break_hi = 0.0;  // bracket when !completed
  std::string break_message;
  std::vector<ContinuationStep> trace;  // populated when completed
  bool ends_equal = false;
  FrameOutcome start, end;  // populated when completed
};

// Homotopy sweep between two fields sharing a's first frame and
// neighborhood; `steps` parameter values including both ends.
SweepReport continuation_sweep(const ProblemSpec& a, const ProblemSpec& b,
                               int32_t steps, const std::string& label);

enum class ReportFormat { Json, Csv, Svg };
ReportFormat parse_format(const std::string& name);  // ValidationError

std::string report_json(const RunReport& r);
std::string report_csv(const RunReport& r);
std::string sweep_json(const SweepReport& r);
std::string sweep_csv(const SweepReport& r);
// Phase portrait of one two-dimensional frame; requires cube id lists.
std::string frame_svg(const FrameOutcome& f);

// Writes the chosen rendering under out_dir and returns the paths written.
// SVG renders only two-dimensional frames; others are skipped with a
// notice on stderr.
std::vector<std::string> emit_report(const RunReport& r, ReportFormat f,
                                     const std::string& out_dir);
std::vector<std::string> emit_sweep(const SweepReport& r, ReportFormat f,
                                    const std::string& out_dir);

}  // namespace conley
