#include "conley/subspace.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "conley/errors.hpp"
#include "conley/rng.hpp"
#include "window.hpp"

namespace conley {

using detail::dense_window;
using detail::embed_columns;
using detail::window_union;

namespace {

// ||(1 - pi_V) restricted to the span of coordinates t||, exact:
// sqrt(1 - lambda_min(B^T B)) with B the frame rows at t.
double restriction_norm(const Frame& V, const std::vector<int32_t>& t) {
  if (t.empty()) return 0.0;
  if (V.dim == 0) return 1.0;
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(V.dim, static_cast<int>(t.size()));
  for (std::size_t j = 0; j < t.size(); ++j) {
    const auto it =
        std::lower_bound(V.support.begin(), V.support.end(), t[j]);
    if (it == V.support.end() || *it != t[j]) continue;
    const std::size_t r = static_cast<std::size_t>(it - V.support.begin());
    for (int32_t k = 0; k < V.dim; ++k)
      B(k, static_cast<int>(j)) = V.cols[r * static_cast<std::size_t>(V.dim) + k];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B.transpose() * B,
                                                    Eigen::EigenvaluesOnly);
  const double lmin = std::clamp(es.eigenvalues()(0), 0.0, 1.0);
  return std::sqrt(1.0 - lmin);
}

double block_norm(const std::vector<double>& block, int32_t dim) {
  if (dim == 0) return 0.0;
  Eigen::MatrixXd A(dim, dim);
  for (int32_t i = 0; i < dim; ++i)
    for (int32_t j = 0; j < dim; ++j)
      A(i, j) = block[static_cast<std::size_t>(i) * dim + j];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
  return std::max(std::fabs(es.eigenvalues()(0)),
                  std::fabs(es.eigenvalues()(dim - 1)));
}

}  // namespace

AdmissibilityBudget AdmissibilityBudget::make(double c1, double c2,
                                              double degeneracy_tol) {
  if (!(c1 > 0.0) || !(c2 > 0.0))
    throw ValidationError("admissibility budgets must be positive");
  if (!(degeneracy_tol > 0.0))
    throw ValidationError("degeneracy tolerance must be positive");
  return {c1, c2, degeneracy_tol};
}

double commutator_norm(const SpectralOperator& L, const Frame& V) {
  if (V.dim == 0) return 0.0;
  const std::vector<int32_t> u = window_union(L, V.support);
  const Eigen::MatrixXd Lw = dense_window(L, u);
  const Eigen::MatrixXd C = embed_columns(V, u);
  const Eigen::MatrixXd P = C * C.transpose();
  const Eigen::MatrixXd M = Lw * P - P * Lw;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  return svd.singularValues()(0);
}

ResidualBound residual_compact_norm(const StructuredCompactMap& Q,
                                    const Frame& V, double r_x) {
  if (!(r_x > 0.0)) throw ValidationError("neighborhood radius must be positive");
  ResidualBound rb;

  // Certified upper bound, split by structure.  Each part's range lies in a
  // known coordinate span, where the projection deficiency is computable.
  double upper = 0.0;
  if (!Q.components.empty())
    upper += restriction_norm(V, Q.output_indices()) * Q.poly_sup_ball(r_x);
  if (Q.linear_block_dim > 0) {
    std::vector<int32_t> t(Q.linear_block_dim);
    for (int32_t i = 0; i < Q.linear_block_dim; ++i) t[i] = i;
    upper += restriction_norm(V, t) * block_norm(Q.linear_block, Q.linear_block_dim) * r_x;
  }
  if (!Q.diagonal_compact.is_zero()) {
    double in_span = 0.0;
    for (int32_t i : V.support)
      in_span = std::max(in_span, std::fabs(Q.diagonal_compact.value(i)));
    double off_span;
    if (V.support.empty()) {
      off_span = Q.diagonal_compact.sup_all();
    } else {
      const int32_t hi = V.support.back() + 1;
      off_span = Q.diagonal_compact.tail_sup(hi);
      for (int32_t i = 0; i < hi; ++i)
        if (!std::binary_search(V.support.begin(), V.support.end(), i))
          off_span = std::max(off_span, std::fabs(Q.diagonal_compact.value(i)));
    }
    upper += (restriction_norm(V, V.support) * in_span + off_span) * r_x;
  }
  rb.upper = upper;

  // Sampled lower bound over deterministic directions and radii.
  std::vector<int32_t> axes = Q.input_support;
  for (int32_t o : Q.output_indices()) axes.push_back(o);
  for (int32_t i = 0; i < Q.linear_block_dim; ++i) axes.push_back(i);
  for (int32_t i = 0; i < 4; ++i) axes.push_back(i);
  if (!V.support.empty()) axes.push_back(V.support.back() + 1);
  std::sort(axes.begin(), axes.end());
  axes.erase(std::unique(axes.begin(), axes.end()), axes.end());
  if (axes.size() > 64) axes.resize(64);

  std::vector<Vec> dirs;
  for (int32_t i : axes) dirs.push_back(Vec::unit(i));
  SplitMix64 rng(0x8f2d1c3b5a7e9640ULL);
  for (int k = 0; k < 8; ++k) {
    Vec v;
    for (int32_t i : axes) v.set(i, rng.uniform(-1.0, 1.0));
    const double n = v.norm();
    if (n > 0.0) v *= 1.0 / n;
    dirs.push_back(v);
  }
  const double radii[] = {1.0, 0.75, 0.5, 0.25, 0.05};
  double lower = 0.0;
  for (const Vec& d : dirs)
    for (double s : radii) {
      Vec x = d;
      x *= s * r_x;
      lower = std::max(lower, V.project_defect(Q.eval(x)));
    }
  rb.lower = std::min(lower, rb.upper);
  return rb;
}

SignatureDecomposition signature(const SpectralOperator& L, const Frame& V,
                                 double degeneracy_tol,
                                 bool require_nondegenerate) {
  if (!(degeneracy_tol > 0.0))
    throw ValidationError("degeneracy tolerance must be positive");
  SignatureDecomposition sig;
  sig.v = V;
  sig.margin = std::numeric_limits<double>::infinity();
  if (V.dim == 0) return sig;

  const std::vector<int32_t> u = window_union(L, V.support);
  const Eigen::MatrixXd Lw = dense_window(L, u);
  const Eigen::MatrixXd C = embed_columns(V, u);
  Eigen::MatrixXd M = C.transpose() * Lw * C;
  M = 0.5 * (M + M.transpose().eval());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);

  std::vector<int32_t> plus, minus, zero;
  for (int32_t i = 0; i < V.dim; ++i) {
    const double ev = es.eigenvalues()(i);
    if (std::fabs(ev) <= degeneracy_tol)
      zero.push_back(i);
    else if (ev > 0.0)
      plus.push_back(i);
    else
      minus.push_back(i);
  }
  if (require_nondegenerate && !zero.empty())
    throw NondegeneracyError(
        "compressed form has an eigenvalue within the degeneracy tolerance of zero");

  auto take = [&](const std::vector<int32_t>& idx, Frame& out,
                  std::vector<double>& evs) {
    if (idx.empty()) {
      out = Frame{};
      return;
    }
    std::vector<double> R(static_cast<std::size_t>(V.dim) * idx.size());
    for (int32_t r = 0; r < V.dim; ++r)
      for (std::size_t j = 0; j < idx.size(); ++j)
        R[static_cast<std::size_t>(r) * idx.size() + j] =
            es.eigenvectors()(r, idx[j]);
    out = V.mixed(R, static_cast<int32_t>(idx.size()));
    for (int32_t i : idx) {
      evs.push_back(es.eigenvalues()(i));
      sig.margin = std::min(sig.margin, std::fabs(es.eigenvalues()(i)));
    }
  };
  take(plus, sig.v_plus, sig.eigen_plus);
  take(minus, sig.v_minus, sig.eigen_minus);
  {
    // the zero class does not enter the margin
    const double saved = sig.margin;
    take(zero, sig.v_zero, sig.eigen_zero);
    sig.margin = saved;
    sig.eigen_zero.clear();
    for (int32_t i : zero) sig.eigen_zero.push_back(es.eigenvalues()(i));
  }
  return sig;
}

AdmissibilityReport admissible(const PermissibleField& f, const Frame& V,
                               double r_x, const AdmissibilityBudget& budget) {
  AdmissibilityReport rep;
  const Frame kf = kernel_frame(f.L);
  rep.kernel_defect = 0.0;
  for (int32_t j = 0; j < kf.dim; ++j)
    rep.kernel_defect = std::max(rep.kernel_defect, V.project_defect(kf.column(j)));
  rep.kernel_ok = rep.kernel_defect <= kKernelTol;

  rep.commutator = commutator_norm(f.L, V);
  rep.commutator_ok = rep.commutator <= budget.c1;

  const ResidualBound rb = residual_compact_norm(f.Q, V, r_x);
  rep.residual_upper = rb.upper;
  rep.residual_lower = rb.lower;
  rep.residual_ok = rb.upper <= budget.c2;

  rep.ok = rep.kernel_ok && rep.commutator_ok && rep.residual_ok;
  return rep;
}

std::vector<Frame> build_coordinate_ladder(const PermissibleField& f,
                                           int32_t n_max) {
  if (n_max < f.L.kernel_dim())
    throw ValidationError("ladder too short to contain the kernel");
  std::vector<Frame> ladder;
  ladder.reserve(n_max);
  for (int32_t k = 1; k <= n_max; ++k) {
    std::vector<int32_t> idx(k);
    for (int32_t i = 0; i < k; ++i) idx[i] = i;
    ladder.push_back(Frame::coordinate_span(std::move(idx)));
  }

  // Asymptotic invariance: once the core block is inside V_k the commutator
  // vanishes identically (L is block diagonal with respect to V_k).
  for (int32_t k = f.L.core_dim; k <= n_max; ++k)
    if (commutator_norm(f.L, ladder[static_cast<std::size_t>(k) - 1]) > 1e-12)
      throw ValidationError("coordinate ladder is not asymptotically invariant");

  // Pointwise convergence of the projections, checked on a finite test set
  // of decaying vectors: defects must be non-increasing along the ladder.
  std::vector<Vec> tests;
  tests.push_back(Vec::unit(0));
  {
    Vec g, p;
    for (int32_t i = 0; i < 64; ++i) {
      g.set(i, std::ldexp(1.0, -i));
      p.set(i, 1.0 / ((i + 1.0) * (i + 1.0)));
    }
    tests.push_back(g);
    tests.push_back(p);
  }
  for (const Vec& t : tests) {
    double prev = std::numeric_limits<double>::infinity();
    for (const Frame& v : ladder) {
      const double d = v.project_defect(t);
      if (d > prev + 1e-12)
        throw ValidationError("ladder projections fail pointwise convergence");
      prev = d;
    }
  }
  return ladder;
}

Frame extend_subspace(const SpectralOperator& L, const Frame& W, double eps,
                      const std::vector<Frame>& ladder) {
  if (!(eps > 0.0)) throw ValidationError("commutator target must be positive");
  if (commutator_norm(L, W) < eps) return W;
  for (const Frame& en : ladder) {
    std::vector<Vec> raw = W.columns();
    for (const Vec& c : en.columns()) raw.push_back(c);
    Frame e = Frame::orthonormalized(raw);
    if (!e.contains(W)) continue;
    if (commutator_norm(L, e) < eps) return e;
  }
  throw AdmissibilityError(
      "no ladder element brings the commutator under the target");
}

}  // namespace conley
