#include "conley/stable.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "conley/errors.hpp"
#include "window.hpp"

namespace conley {

Neighborhood Neighborhood::ball(double r) {
  if (!(r > 0.0) || !std::isfinite(r))
    throw ValidationError("neighborhood: ball radius must be positive");
  Neighborhood x;
  x.is_ball = true;
  x.radius = r;
  return x;
}

Neighborhood Neighborhood::box(std::vector<double> lo, std::vector<double> hi) {
  if (lo.empty() || lo.size() != hi.size())
    throw ValidationError("neighborhood: box bounds must match");
  for (std::size_t i = 0; i < lo.size(); ++i)
    if (!(lo[i] < hi[i]) || !std::isfinite(lo[i]) || !std::isfinite(hi[i]))
      throw ValidationError("neighborhood: box bounds must be finite, lo < hi");
  Neighborhood x;
  x.is_ball = false;
  x.lo = std::move(lo);
  x.hi = std::move(hi);
  return x;
}

double Neighborhood::bounding_radius(int32_t dim) const {
  if (is_ball) return radius;
  if (static_cast<int32_t>(lo.size()) != dim)
    throw ValidationError("neighborhood: box dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < lo.size(); ++i) {
    const double m = std::max(std::fabs(lo[i]), std::fabs(hi[i]));
    s += m * m;
  }
  return std::sqrt(s);
}

StableIndex make_stable_index(const HomologicalIndex& h, int32_t shift) {
  StableIndex out;
  out.shift = shift;
  for (const GradedGroup& g : h.groups) {
    StableEntry e;
    e.virtual_degree = g.degree - shift;
    e.rank = g.rank;
    e.torsion = g.torsion;
    out.entries.push_back(std::move(e));
  }
  return out;
}

bool stable_equal(const StableIndex& a, const StableIndex& b) {
  if (a.entries.size() != b.entries.size()) return false;
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    const StableEntry& x = a.entries[i];
    const StableEntry& y = b.entries[i];
    if (x.virtual_degree != y.virtual_degree || x.rank != y.rank ||
        x.torsion != y.torsion)
      return false;
  }
  return true;
}

StableIndex suspended(const StableIndex& a, int32_t k) {
  StableIndex out = a;
  for (StableEntry& e : out.entries) e.virtual_degree += k;
  return out;
}

namespace {

std::vector<int32_t> resolve_dims(const GridConfig& gc, int32_t d) {
  if (gc.subdivisions.empty())
    throw ValidationError("grid: subdivisions must be configured");
  std::vector<int32_t> dims = gc.subdivisions;
  if (dims.size() == 1) dims.assign(static_cast<std::size_t>(d), dims[0]);
  if (static_cast<int32_t>(dims.size()) != d)
    throw ValidationError("grid: one subdivision count per axis, or a single "
                          "value for all axes");
  if (gc.margin < 2)
    throw ValidationError("grid: margin must be at least 2 cells");
  for (int32_t n : dims)
    if (n <= 2 * gc.margin)
      throw ValidationError("grid: subdivisions must exceed twice the margin");
  return dims;
}

// Box sized so the neighborhood occupies all but `margin` cells per side.
void grid_box(const Neighborhood& x, const std::vector<int32_t>& dims,
              int32_t margin, std::vector<double>& center,
              std::vector<double>& half) {
  const std::size_t d = dims.size();
  center.assign(d, 0.0);
  half.assign(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    const double stretch =
        static_cast<double>(dims[i]) / (dims[i] - 2 * margin);
    if (x.is_ball) {
      half[i] = x.radius * stretch;
    } else {
      center[i] = 0.5 * (x.lo[i] + x.hi[i]);
      half[i] = 0.5 * (x.hi[i] - x.lo[i]) * stretch;
    }
  }
}

// Eigen-aligned copy of V: columns rotated to the eigenbasis of the
// compressed operator block, eigenvalues ascending, signs canonical.
Frame align_frame(const SpectralOperator& L, const Frame& V) {
  const std::vector<int32_t> u = detail::window_union(L, V.support);
  const Eigen::MatrixXd Lw = detail::dense_window(L, u);
  const Eigen::MatrixXd E = detail::embed_columns(V, u);
  Eigen::MatrixXd block = E.transpose() * Lw * E;
  block = 0.5 * (block + block.transpose().eval());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(block);
  Eigen::MatrixXd R = es.eigenvectors();
  for (int j = 0; j < R.cols(); ++j) {
    int arg = 0;
    for (int i = 1; i < R.rows(); ++i)
      if (std::fabs(R(i, j)) > std::fabs(R(arg, j))) arg = i;
    if (R(arg, j) < 0.0) R.col(j) = -R.col(j);
  }
  std::vector<double> flat(static_cast<std::size_t>(R.rows()) *
                           static_cast<std::size_t>(R.cols()));
  for (int i = 0; i < R.rows(); ++i)
    for (int j = 0; j < R.cols(); ++j)
      flat[static_cast<std::size_t>(i) * static_cast<std::size_t>(R.cols()) +
           static_cast<std::size_t>(j)] = R(i, j);
  return V.mixed(flat, V.dim);
}

struct Pipeline {
  CombinatorialIndexPair pair;
  OuterMap outer;
  CubeSet region;
  int32_t refinements = 0;
};

Pipeline run_pipeline(const PermissibleField& F, const Frame& aligned,
                      const Neighborhood& X, const GridConfig& gc,
                      const FlowConfig& fc) {
  if (!(fc.box_scale >= 1.0))
    throw ValidationError("flow: box_scale must be at least 1");
  std::vector<int32_t> dims = resolve_dims(gc, aligned.dim);
  for (int32_t attempt = 0;; ++attempt) {
    std::vector<double> center, half;
    grid_box(X, dims, gc.margin, center, half);
    CubicalGrid grid = CubicalGrid::make(aligned, center, half, dims);

    std::vector<double> field_half(half);
    for (double& h : field_half) h *= fc.box_scale;
    const FiniteField field =
        compress_field(F, aligned, center, std::move(field_half));

    Pipeline p;
    p.outer = build_outer_map(field, grid, fc.tau, fc.tol);
    p.region = X.is_ball ? grid.cubes_meeting_ball(X.radius)
                         : grid.cubes_meeting_box(X.lo, X.hi);
    p.refinements = attempt;
    try {
      p.pair = build_index_pair(p.outer, p.region);
      return p;
    } catch (const IsolationError&) {
      if (attempt >= gc.max_refinements) throw;
    } catch (const RefineError&) {
      if (attempt >= gc.max_refinements) throw;
    }
    for (int32_t& n : dims) n *= 2;
  }
}

std::string admissibility_message(const AdmissibilityReport& r) {
  std::ostringstream os;
  os << "subspace fails the admissibility budget:";
  if (!r.kernel_ok) os << " kernel defect " << r.kernel_defect;
  if (!r.commutator_ok) os << " commutator " << r.commutator;
  if (!r.residual_ok) os << " residual " << r.residual_upper;
  return os.str();
}

}  // namespace

AssemblyResult assemble_stable_index(const PermissibleField& F,
                                     const Neighborhood& X, const Frame& V,
                                     const AdmissibilityBudget& budget,
                                     const GridConfig& grid_cfg,
                                     const FlowConfig& flow_cfg,
                                     std::string frame_label) {
  AssemblyResult res;
  res.admissibility = admissible(F, V, X.bounding_radius(V.dim), budget);
  if (!res.admissibility.ok)
    throw AdmissibilityError(admissibility_message(res.admissibility));

  res.sig = signature(F.L, V, budget.degeneracy_tol, true);
  res.aligned = align_frame(F.L, V);

  Pipeline p = run_pipeline(F, res.aligned, X, grid_cfg, flow_cfg);
  res.pair = std::move(p.pair);
  res.outer = std::move(p.outer);
  res.region = std::move(p.region);
  res.refinements = p.refinements;

  res.homology = relative_homology(res.pair);
  res.index = make_stable_index(res.homology, res.sig.v_minus.dim);

  Provenance& prov = res.index.provenance;
  prov.frame_label = frame_label.empty()
                         ? "dim" + std::to_string(V.dim)
                         : std::move(frame_label);
  prov.frame_dim = V.dim;
  prov.subdivisions = res.pair.grid.dims;
  prov.refinements = res.refinements;
  prov.tau = flow_cfg.tau;
  prov.tol = flow_cfg.tol;
  return res;
}

SuspensionReport suspension_consistency(const PermissibleField& F,
                                        const Neighborhood& X, const Frame& V,
                                        const Frame& W,
                                        const AdmissibilityBudget& budget,
                                        const GridConfig& grid_v,
                                        const GridConfig& grid_w,
                                        const FlowConfig& flow_cfg) {
  if (!W.contains(V))
    throw ValidationError("suspension: V must be contained in W");

  // U = W minus V: project V out of W's columns and orthonormalize.
  std::vector<Vec> raw;
  for (int32_t j = 0; j < W.dim; ++j) {
    Vec w = W.column(j);
    w.axpy(-1.0, V.project(w));
    raw.push_back(std::move(w));
  }
  const Frame U = Frame::orthonormalized(raw);
  if (U.dim != W.dim - V.dim)
    throw ValidationError("suspension: complement dimension mismatch");

  SuspensionReport rep;
  rep.u_dim = U.dim;
  const SignatureDecomposition sig_u =
      signature(F.L, U, budget.degeneracy_tol, true);
  rep.u_minus = sig_u.v_minus.dim;

  rep.on_v = assemble_stable_index(F, X, V, budget, grid_v, flow_cfg,
                                   "suspension_v");
  rep.on_w = assemble_stable_index(F, X, W, budget, grid_w, flow_cfg,
                                   "suspension_w");

  // H_k on W must equal H_{k - u_minus} on V.
  HomologicalIndex shifted = rep.on_v.homology;
  for (GradedGroup& g : shifted.groups) g.degree += rep.u_minus;
  shifted.normalize();
  rep.homology_shift_ok = (shifted == rep.on_w.homology);
  rep.stable_ok = stable_equal(rep.on_v.index, rep.on_w.index);
  rep.bookkeeping_ok = rep.on_v.sig.v_plus.dim + rep.u_dim ==
                       rep.on_w.sig.v_plus.dim + rep.u_minus;
  return rep;
}

ShiftReport decomposition_shift(const PermissibleField& a,
                                const PermissibleField& b,
                                const Neighborhood& X, const Frame& V,
                                const AdmissibilityBudget& budget,
                                const GridConfig& grid_cfg,
                                const FlowConfig& flow_cfg) {
  ShiftReport rep;
  rep.on_a = assemble_stable_index(a, X, V, budget, grid_cfg, flow_cfg,
                                   "decomposition_a");
  rep.on_b = assemble_stable_index(b, X, V, budget, grid_cfg, flow_cfg,
                                   "decomposition_b");
  rep.shift = rep.on_a.sig.v_minus.dim - rep.on_b.sig.v_minus.dim;
  rep.homology_identical = (rep.on_a.homology == rep.on_b.homology);
  rep.reconciled = stable_equal(suspended(rep.on_a.index, rep.shift),
                                rep.on_b.index);
  return rep;
}

ContinuationReport continuation_check(const PermissibleField& a,
                                      const PermissibleField& b,
                                      const Neighborhood& X, const Frame& V,
                                      int32_t steps, double rho_limit,
                                      const AdmissibilityBudget& budget,
                                      const GridConfig& grid_cfg,
                                      const FlowConfig& flow_cfg) {
  if (steps < 2)
    throw ValidationError("continuation: at least two sweep points needed");
  const double r_x = X.bounding_radius(V.dim);

  ContinuationReport rep;
  rep.rho = decomposition_pseudometric(a, b, r_x);
  if (!(rep.rho <= rho_limit)) {
    std::ostringstream os;
    os << "continuation: decomposition distance " << rep.rho
       << " exceeds the configured limit " << rho_limit;
    throw ValidationError(os.str());
  }

  rep.start = assemble_stable_index(a, X, V, budget, grid_cfg, flow_cfg,
                                    "continuation_start");
  rep.end = assemble_stable_index(b, X, V, budget, grid_cfg, flow_cfg,
                                  "continuation_end");

  // One shared frame and box so the family interpolates fields on the same
  // coordinates; isolation is probed on the unrefined grid.
  const Frame aligned = align_frame(a.L, V);
  const std::vector<int32_t> dims = resolve_dims(grid_cfg, aligned.dim);
  std::vector<double> center, half;
  grid_box(X, dims, grid_cfg.margin, center, half);
  const CubicalGrid grid = CubicalGrid::make(aligned, center, half, dims);
  std::vector<double> field_half(half);
  for (double& h : field_half) h *= flow_cfg.box_scale;
  const FiniteField fa = compress_field(a, aligned, center, field_half);
  const FiniteField fb = compress_field(b, aligned, center, field_half);
  const CubeSet region = X.is_ball ? grid.cubes_meeting_ball(X.radius)
                                   : grid.cubes_meeting_box(X.lo, X.hi);

  double last_good = 0.0;
  for (int32_t i = 0; i < steps; ++i) {
    const double s = static_cast<double>(i) / (steps - 1);
    const FiniteField fs = homotopy_family(fa, fb, s);
    const OuterMap outer = build_outer_map(fs, grid, flow_cfg.tau, flow_cfg.tol);
    const IsolationReport iso = check_isolation(outer, region);
    ContinuationStep step;
    step.s = s;
    step.isolated = iso.ok;
    step.invariant_cubes = static_cast<int64_t>(iso.s.size());
    rep.steps.push_back(step);
    if (!iso.ok) {
      std::ostringstream os;
      os << "continuation: isolation lost at parameter " << s;
      throw ContinuationBreakError(os.str(), last_good, s);
    }
    last_good = s;
  }
  rep.ends_equal = stable_equal(rep.start.index, rep.end.index);
  return rep;
}

}  // namespace conley
