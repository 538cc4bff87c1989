#include "conley/spectral.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "conley/errors.hpp"
#include "conley/rng.hpp"

namespace conley {

double cutoff_chi(double r, double r_cut) {
  if (r <= r_cut) return 1.0;
  if (r >= 2.0 * r_cut) return 0.0;
  const double t = (r - r_cut) / r_cut;
  return 1.0 - t * t * (3.0 - 2.0 * t);
}

double cutoff_slope_bound(double r_cut) { return 1.5 / r_cut; }

namespace {

Eigen::MatrixXd core_matrix(const SpectralOperator& L) {
  Eigen::MatrixXd M(L.core_dim, L.core_dim);
  for (int32_t i = 0; i < L.core_dim; ++i)
    for (int32_t j = 0; j < L.core_dim; ++j)
      M(i, j) = L.core[static_cast<std::size_t>(i) * L.core_dim + j];
  return M;
}

// Scans the tail until the modifier is dominated, returning a certified
// lower bound on inf_i |tail_at(i)| (and, via out parameter, an upper bound
// on sup_i |tail_at(i)|).
double tail_bounds(const SpectralOperator& L, double* sup_out) {
  const double base_min =
      L.single_tail ? std::fabs(L.tail_plus)
                    : std::min(std::fabs(L.tail_plus), std::fabs(L.tail_minus));
  const double base_max =
      L.single_tail ? std::fabs(L.tail_plus)
                    : std::max(std::fabs(L.tail_plus), std::fabs(L.tail_minus));
  if (L.tail_modifier.is_zero()) {
    if (sup_out) *sup_out = base_max;
    return base_min;
  }
  int32_t stop = L.core_dim;
  while (L.tail_modifier.tail_sup(stop) > 0.5 * base_min) {
    if (stop > (1 << 22))
      throw ValidationError(
          "tail modifier does not decay below half the tail eigenvalues");
    stop = std::max(stop * 2, L.core_dim + 16);
  }
  double inf_v = base_min - L.tail_modifier.tail_sup(stop);
  double sup_v = base_max + L.tail_modifier.tail_sup(stop);
  for (int32_t i = L.core_dim; i < stop; ++i) {
    const double v = std::fabs(L.tail_at(i));
    inf_v = std::min(inf_v, v);
    sup_v = std::max(sup_v, v);
  }
  if (sup_out) *sup_out = sup_v;
  return inf_v;
}

}  // namespace

SpectralOperator SpectralOperator::make(
    const std::vector<double>& core_diagonal,
    const std::vector<double>& core_perturbation, double tail_plus,
    double tail_minus, bool single_tail, std::optional<double> declared_gap) {
  SpectralOperator L;
  L.core_dim = static_cast<int32_t>(core_diagonal.size());
  const std::size_t m = core_diagonal.size();
  L.core.assign(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) L.core[i * m + i] = core_diagonal[i];
  if (!core_perturbation.empty()) {
    if (core_perturbation.size() != m * m)
      throw ValidationError("core perturbation must be core_dim x core_dim");
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        if (std::fabs(core_perturbation[i * m + j] -
                      core_perturbation[j * m + i]) > 1e-12)
          throw ValidationError("core perturbation is not symmetric at 1e-12");
        L.core[i * m + j] += core_perturbation[i * m + j];
      }
  }
  L.tail_plus = tail_plus;
  L.tail_minus = tail_minus;
  L.single_tail = single_tail;
  if (single_tail) {
    if (tail_plus == 0.0) throw ValidationError("tail eigenvalue must be nonzero");
  } else {
    if (!(tail_plus > 0.0) || !(tail_minus < 0.0))
      throw ValidationError("two-sided tail needs tail_plus > 0 > tail_minus");
  }

  const double tail_inf = tail_bounds(L, nullptr);
  double nonzero_min = tail_inf;
  for (double ev : L.core_eigenvalues()) {
    const double a = std::fabs(ev);
    if (a > 1e-9) nonzero_min = std::min(nonzero_min, a);
  }
  if (!(nonzero_min > 0.0))
    throw ValidationError("operator has nonzero spectrum arbitrarily close to 0");
  if (declared_gap) {
    if (!(*declared_gap > 0.0))
      throw ValidationError("spectral gap must be positive");
    if (*declared_gap > nonzero_min + 1e-12)
      throw ValidationError("declared spectral gap exceeds the derived bound");
    L.spectral_gap = *declared_gap;
  } else {
    L.spectral_gap = nonzero_min;
  }
  return L;
}

double SpectralOperator::tail_at(int32_t i) const {
  double base;
  if (single_tail) {
    base = tail_plus;
  } else {
    const int32_t k = i + 1;  // coordinate number
    base = (k % 2 == 0) ? tail_plus : tail_minus;
  }
  return base + tail_modifier.value(i);
}

Vec SpectralOperator::apply(const Vec& x) const {
  Vec y;
  if (core_dim > 0) {
    std::vector<double> xc(core_dim, 0.0);
    bool any = false;
    for (const auto& [i, v] : x.entries)
      if (i < core_dim) {
        xc[i] = v;
        any = true;
      }
    if (any) {
      for (int32_t r = 0; r < core_dim; ++r) {
        double s = 0.0;
        for (int32_t c = 0; c < core_dim; ++c)
          s += core[static_cast<std::size_t>(r) * core_dim + c] * xc[c];
        if (s != 0.0) y.entries.emplace_back(r, s);
      }
    }
  }
  for (const auto& [i, v] : x.entries)
    if (i >= core_dim) y.entries.emplace_back(i, tail_at(i) * v);
  return y;
}

double SpectralOperator::op_norm_upper() const {
  double sup_tail = 0.0;
  tail_bounds(*this, &sup_tail);
  double core_norm = 0.0;
  for (double ev : core_eigenvalues()) core_norm = std::max(core_norm, std::fabs(ev));
  return std::max(core_norm, sup_tail);
}

std::vector<double> SpectralOperator::core_eigenvalues() const {
  if (core_dim == 0) return {};
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(core_matrix(*this),
                                                    Eigen::EigenvaluesOnly);
  std::vector<double> evs(core_dim);
  for (int32_t i = 0; i < core_dim; ++i) evs[i] = es.eigenvalues()(i);
  return evs;
}

int32_t SpectralOperator::kernel_dim() const {
  int32_t k = 0;
  const double tol = 0.5 * spectral_gap;
  for (double ev : core_eigenvalues())
    if (std::fabs(ev) < tol) ++k;
  return k;
}

Frame kernel_frame(const SpectralOperator& L) {
  Frame f;
  f.dim = 0;
  if (L.core_dim == 0) return f;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(core_matrix(L));
  const double tol = 0.5 * L.spectral_gap;
  std::vector<int32_t> keep;
  for (int32_t i = 0; i < L.core_dim; ++i)
    if (std::fabs(es.eigenvalues()(i)) < tol) keep.push_back(i);
  if (keep.empty()) return f;
  f.support.resize(L.core_dim);
  for (int32_t i = 0; i < L.core_dim; ++i) f.support[i] = i;
  f.dim = static_cast<int32_t>(keep.size());
  f.cols.assign(static_cast<std::size_t>(L.core_dim) * keep.size(), 0.0);
  for (std::size_t j = 0; j < keep.size(); ++j) {
    Eigen::VectorXd v = es.eigenvectors().col(keep[j]);
    // canonical sign: largest-magnitude entry positive
    int32_t arg = 0;
    for (int32_t i = 1; i < L.core_dim; ++i)
      if (std::fabs(v(i)) > std::fabs(v(arg))) arg = i;
    if (v(arg) < 0.0) v = -v;
    for (int32_t i = 0; i < L.core_dim; ++i)
      f.cols[static_cast<std::size_t>(i) * keep.size() + j] = v(i);
  }
  return f;
}

StructuredCompactMap StructuredCompactMap::zero() { return {}; }

StructuredCompactMap StructuredCompactMap::make(
    std::vector<int32_t> input_support,
    std::vector<std::pair<int32_t, Poly>> comps, double cutoff_radius,
    DecayRule diagonal_compact) {
  StructuredCompactMap q;
  q.input_support = std::move(input_support);
  q.components = std::move(comps);
  q.cutoff_radius = cutoff_radius;
  q.diagonal_compact = std::move(diagonal_compact);
  std::sort(q.input_support.begin(), q.input_support.end());
  std::sort(q.components.begin(), q.components.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  if (!q.components.empty()) {
    if (!(cutoff_radius > 0.0) || !std::isfinite(cutoff_radius))
      throw ValidationError(
          "polynomial nonlinearity requires a finite positive cutoff radius");
    for (const auto& [o, p] : q.components)
      for (int32_t v : p.variables())
        if (!std::binary_search(q.input_support.begin(), q.input_support.end(), v))
          throw ValidationError("component reads a coordinate outside input_support");
  }
  return q;
}

bool StructuredCompactMap::trivial() const {
  return components.empty() && diagonal_compact.is_zero() && linear_block_dim == 0;
}

Vec StructuredCompactMap::eval(const Vec& x) const {
  Vec y;
  if (!components.empty()) {
    const double chi = cutoff_chi(x.norm(), cutoff_radius);
    if (chi != 0.0)
      for (const auto& [o, p] : components) {
        const double v = chi * p.eval(x);
        if (v != 0.0) y.add(o, v);
      }
  }
  if (linear_block_dim > 0) {
    for (int32_t r = 0; r < linear_block_dim; ++r) {
      double s = 0.0;
      for (const auto& [i, v] : x.entries) {
        if (i >= linear_block_dim) break;
        s += linear_block[static_cast<std::size_t>(r) * linear_block_dim + i] * v;
      }
      if (s != 0.0) y.add(r, s);
    }
  }
  if (!diagonal_compact.is_zero())
    for (const auto& [i, v] : x.entries) {
      const double k = diagonal_compact.value(i);
      if (k != 0.0) y.add(i, k * v);
    }
  return y;
}

double StructuredCompactMap::poly_sup_ball(double r) const {
  if (components.empty()) return 0.0;
  const double reff = std::min(r, 2.0 * cutoff_radius);
  double s = 0.0;
  for (const auto& [o, p] : components) {
    const double b = p.sup_ball(reff);
    s += b * b;
  }
  return std::sqrt(s);
}

double StructuredCompactMap::global_poly_bound() const {
  return poly_sup_ball(2.0 * cutoff_radius);
}

double StructuredCompactMap::linear_norm_upper() const {
  if (linear_block_dim == 0) return diagonal_compact.sup_all();
  Eigen::MatrixXd M(linear_block_dim, linear_block_dim);
  for (int32_t i = 0; i < linear_block_dim; ++i)
    for (int32_t j = 0; j < linear_block_dim; ++j)
      M(i, j) = linear_block[static_cast<std::size_t>(i) * linear_block_dim + j];
  for (int32_t i = 0; i < linear_block_dim; ++i)
    M(i, i) += diagonal_compact.value(i);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
  double block_norm = 0.0;
  for (int32_t i = 0; i < linear_block_dim; ++i)
    block_norm = std::max(block_norm, std::fabs(es.eigenvalues()(i)));
  // The operator is block-diagonal: the block vs the remaining diagonal.
  return std::max(block_norm, diagonal_compact.tail_sup(linear_block_dim));
}

std::vector<int32_t> StructuredCompactMap::output_indices() const {
  std::vector<int32_t> out;
  for (const auto& [o, p] : components) out.push_back(o);
  return out;
}

int32_t StructuredCompactMap::structure_extent() const {
  int32_t e = linear_block_dim;
  for (const auto& [o, p] : components) e = std::max(e, o + 1);
  return e;
}

PermissibleField PermissibleField::make(SpectralOperator L,
                                        StructuredCompactMap Q) {
  const double B = Q.global_poly_bound();
  const double M = Q.linear_norm_upper();
  return make_with_witness(std::move(L), std::move(Q), M + B, 2.0 * B);
}

PermissibleField PermissibleField::make_with_witness(SpectralOperator L,
                                                     StructuredCompactMap Q,
                                                     double c1, double c2) {
  if (c1 < 0.0 || c2 < 0.0)
    throw ValidationError("growth witness constants must be nonnegative");
  PermissibleField f;
  f.L = std::move(L);
  f.Q = std::move(Q);
  f.c1 = c1;
  f.c2 = c2;
  return f;
}

Vec apply_field(const PermissibleField& f, const Vec& x) {
  return f.L.apply(x) + f.Q.eval(x);
}

Vec CompactPerturbation::apply(const Vec& x) const {
  Vec y;
  for (int32_t r = 0; r < block_dim; ++r) {
    double s = 0.0;
    for (const auto& [i, v] : x.entries) {
      if (i >= block_dim) break;
      s += block[static_cast<std::size_t>(r) * block_dim + i] * v;
    }
    if (s != 0.0) y.add(r, s);
  }
  if (!diagonal.is_zero())
    for (const auto& [i, v] : x.entries) {
      const double k = diagonal.value(i);
      if (k != 0.0) y.add(i, k * v);
    }
  return y;
}

PermissibleField alternative_decomposition(const PermissibleField& f,
                                           const CompactPerturbation& K) {
  if (K.block_dim > 0) {
    for (int32_t i = 0; i < K.block_dim; ++i)
      for (int32_t j = i + 1; j < K.block_dim; ++j)
        if (std::fabs(K.block[static_cast<std::size_t>(i) * K.block_dim + j] -
                      K.block[static_cast<std::size_t>(j) * K.block_dim + i]) >
            1e-12)
          throw ValidationError("decomposition move must be symmetric");
  }
  const SpectralOperator& L = f.L;
  const int32_t m2 = std::max(L.core_dim, K.block_dim);

  // L' core: old core extended by its own tail diagonal, plus K's block,
  // plus K's diagonal rule baked in on [0, m2).
  SpectralOperator L2;
  L2.core_dim = m2;
  L2.core.assign(static_cast<std::size_t>(m2) * m2, 0.0);
  for (int32_t i = 0; i < m2; ++i)
    for (int32_t j = 0; j < m2; ++j) {
      double v = 0.0;
      if (i < L.core_dim && j < L.core_dim)
        v = L.core[static_cast<std::size_t>(i) * L.core_dim + j];
      else if (i == j)
        v = L.tail_at(i);
      if (i < K.block_dim && j < K.block_dim)
        v += K.block[static_cast<std::size_t>(i) * K.block_dim + j];
      if (i == j) v += K.diagonal.value(i);
      L2.core[static_cast<std::size_t>(i) * m2 + j] = v;
    }
  L2.tail_plus = L.tail_plus;
  L2.tail_minus = L.tail_minus;
  L2.single_tail = L.single_tail;
  L2.tail_modifier = L.tail_modifier.plus(K.diagonal);

  // Rederive the gap: core eigenvalues plus the certified tail infimum
  // including the new modifier.
  {
    double nonzero_min = tail_bounds(L2, nullptr);
    for (double ev : L2.core_eigenvalues()) {
      const double a = std::fabs(ev);
      if (a > 1e-9) nonzero_min = std::min(nonzero_min, a);
    }
    if (!(nonzero_min > 0.0))
      throw ValidationError("decomposition move destroys the spectral gap");
    L2.spectral_gap = nonzero_min;
  }

  // Q' = Q - K: block subtracted on max extent, diagonal rule subtracted.
  StructuredCompactMap Q2 = f.Q;
  const int32_t b2 = std::max(f.Q.linear_block_dim, K.block_dim);
  if (b2 > 0) {
    std::vector<double> blk(static_cast<std::size_t>(b2) * b2, 0.0);
    for (int32_t i = 0; i < f.Q.linear_block_dim; ++i)
      for (int32_t j = 0; j < f.Q.linear_block_dim; ++j)
        blk[static_cast<std::size_t>(i) * b2 + j] =
            f.Q.linear_block[static_cast<std::size_t>(i) * f.Q.linear_block_dim + j];
    for (int32_t i = 0; i < K.block_dim; ++i)
      for (int32_t j = 0; j < K.block_dim; ++j)
        blk[static_cast<std::size_t>(i) * b2 + j] -=
            K.block[static_cast<std::size_t>(i) * K.block_dim + j];
    Q2.linear_block = std::move(blk);
    Q2.linear_block_dim = b2;
  }
  Q2.diagonal_compact = f.Q.diagonal_compact.plus(K.diagonal, -1.0);

  return PermissibleField::make(std::move(L2), std::move(Q2));
}

GrowthCheck verify_growth_bound(const PermissibleField& f, int n_samples) {
  GrowthCheck g;
  g.c1 = f.c1;
  g.c2 = f.c2;
  const double r_max = 4.0 * std::max(f.Q.cutoff_radius, 1.0);

  // Deterministic direction set: structure axes plus mixed directions.
  std::vector<Vec> dirs;
  for (int32_t i : f.Q.input_support) dirs.push_back(Vec::unit(i));
  for (int32_t o : f.Q.output_indices()) dirs.push_back(Vec::unit(o));
  for (int32_t i = 0; i < f.Q.linear_block_dim; ++i) dirs.push_back(Vec::unit(i));
  dirs.push_back(Vec::unit(0));
  dirs.push_back(Vec::unit(f.Q.structure_extent() + 3));
  SplitMix64 rng(0x9e3779b97f4a7c15ULL);
  for (int k = 0; k < 8; ++k) {
    Vec v;
    for (int32_t i = 0; i < 6; ++i) v.set(i, rng.uniform(-1.0, 1.0));
    const double n = v.norm();
    if (n > 0) v *= 1.0 / n;
    dirs.push_back(v);
  }
  for (auto& d : dirs) {
    const double n = d.norm();
    if (n > 0.0 && std::fabs(n - 1.0) > 1e-15) d *= 1.0 / n;
  }

  g.ok = true;
  for (int s = 0; s < n_samples; ++s) {
    const double r = r_max * static_cast<double>(s) / (n_samples - 1);
    const Vec& dir = dirs[s % dirs.size()];
    Vec x = dir;
    x *= r;
    const double qn = f.Q.eval(x).norm();
    const double bound = f.c1 * r + f.c2 / (1.0 + r);
    const double viol = qn - bound;
    if (viol > g.worst_violation) {
      g.worst_violation = viol;
      g.worst_radius = r;
    }
  }
  if (g.worst_violation > 1e-12) g.ok = false;
  return g;
}

}  // namespace conley
