#include "conley/flow.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "conley/errors.hpp"
#include "conley/kernels.hpp"
#include "window.hpp"

namespace conley {

using detail::dense_q_linear;
using detail::dense_window;
using detail::embed_columns;
using detail::window_union;

namespace {

// Closed-interval arithmetic for derivative and sup bounds over boxes.
struct Iv {
  double lo = 0.0;
  double hi = 0.0;
};

Iv iv_add(Iv a, Iv b) { return {a.lo + b.lo, a.hi + b.hi}; }

Iv iv_scale(Iv a, double s) {
  return s >= 0.0 ? Iv{a.lo * s, a.hi * s} : Iv{a.hi * s, a.lo * s};
}

Iv iv_mul(Iv a, Iv b) {
  const double p1 = a.lo * b.lo, p2 = a.lo * b.hi, p3 = a.hi * b.lo,
               p4 = a.hi * b.hi;
  return {std::min(std::min(p1, p2), std::min(p3, p4)),
          std::max(std::max(p1, p2), std::max(p3, p4))};
}

Iv iv_pow(Iv a, int32_t p) {
  if (p == 0) return {1.0, 1.0};
  if (p % 2 == 1) {
    double lo = a.lo, hi = a.hi;
    for (int32_t i = 1; i < p; i += 2) {
      lo *= a.lo * a.lo;
      hi *= a.hi * a.hi;
    }
    return {lo, hi};
  }
  const double m = std::max(std::fabs(a.lo), std::fabs(a.hi));
  double hi = 1.0;
  for (int32_t i = 0; i < p; ++i) hi *= m;
  if (a.lo <= 0.0 && a.hi >= 0.0) return {0.0, hi};
  const double n = std::min(std::fabs(a.lo), std::fabs(a.hi));
  double lo = 1.0;
  for (int32_t i = 0; i < p; ++i) lo *= n;
  return {lo, hi};
}

double iv_abs(Iv a) { return std::max(std::fabs(a.lo), std::fabs(a.hi)); }

// Range of a packed polynomial over per-slot intervals.
Iv poly_range(const Poly& p, const std::vector<Iv>& slots) {
  Iv s{0.0, 0.0};
  for (const auto& t : p.terms) {
    Iv m{1.0, 1.0};
    for (const auto& [slot, pw] : t.factors)
      m = iv_mul(m, iv_pow(slots[static_cast<std::size_t>(slot)], pw));
    s = iv_add(s, iv_scale(m, t.coeff));
  }
  return s;
}

// Range of the partial derivative of a packed polynomial w.r.t. one slot.
Iv poly_partial_range(const Poly& p, int32_t slot,
                      const std::vector<Iv>& slots) {
  Iv s{0.0, 0.0};
  for (const auto& t : p.terms) {
    int32_t pw = 0;
    for (const auto& [v, q] : t.factors)
      if (v == slot) pw = q;
    if (pw == 0) continue;
    Iv m{1.0, 1.0};
    for (const auto& [v, q] : t.factors)
      m = iv_mul(m, iv_pow(slots[static_cast<std::size_t>(v)],
                           v == slot ? q - 1 : q));
    s = iv_add(s, iv_scale(m, t.coeff * pw));
  }
  return s;
}

double sigma_max(const Eigen::MatrixXd& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

Eigen::MatrixXd as_matrix(const std::vector<double>& v, int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      m(i, j) = v[static_cast<std::size_t>(i) * cols + j];
  return m;
}

std::vector<double> as_vector(const Eigen::MatrixXd& m) {
  std::vector<double> v(static_cast<std::size_t>(m.rows()) * m.cols());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j)
      v[static_cast<std::size_t>(i) * m.cols() + j] = m(i, j);
  return v;
}

// Ambient slot intervals of the group's variables over the field box.
std::vector<Iv> ambient_slots(const FiniteField& f, const CutGroup& g) {
  const int32_t d = f.frame.dim;
  std::vector<Iv> slots(g.vars.size());
  for (std::size_t k = 0; k < g.vars.size(); ++k) {
    double c = 0.0, w = 0.0;
    for (int32_t j = 0; j < d; ++j) {
      const double r = g.var_rows[k * static_cast<std::size_t>(d) + j];
      c += r * f.box_center[j];
      w += std::fabs(r) * f.box_half[j];
    }
    slots[k] = {c - w, c + w};
  }
  return slots;
}

// Range of |v| over the box restricted to the group's norm coordinates.
void norm_range(const FiniteField& f, const CutGroup& g, double* r_lo,
                double* r_hi) {
  double lo2 = 0.0, hi2 = 0.0;
  auto accumulate = [&](int32_t j) {
    const double c = f.box_center[j], h = f.box_half[j];
    const double m = std::max(std::fabs(c - h), std::fabs(c + h));
    hi2 += m * m;
    const double n = std::max(0.0, std::fabs(c) - h);
    lo2 += n * n;
  };
  if (g.norm_coords.empty())
    for (int32_t j = 0; j < f.frame.dim; ++j) accumulate(j);
  else
    for (int32_t j : g.norm_coords) accumulate(j);
  *r_lo = std::sqrt(lo2);
  *r_hi = std::sqrt(hi2);
}

// Entrywise interval Jacobian of the field over its box, including the
// linear part, the cutoff factor, and the cutoff-slope term.
std::vector<Iv> jacobian_intervals(const FiniteField& f) {
  const int32_t d = f.frame.dim;
  std::vector<Iv> J(static_cast<std::size_t>(d) * d);
  for (int32_t i = 0; i < d; ++i)
    for (int32_t j = 0; j < d; ++j) {
      const double v = f.lin[static_cast<std::size_t>(i) * d + j];
      J[static_cast<std::size_t>(i) * d + j] = {v, v};
    }
  for (const auto& g : f.groups) {
    const std::size_t n = g.packed.size();
    if (n == 0) continue;
    std::vector<Iv> slots = ambient_slots(f, g);
    double r_lo = 0.0, r_hi = 0.0;
    norm_range(f, g, &r_lo, &r_hi);
    const Iv chi{cutoff_chi(r_hi, g.cutoff_radius),
                 cutoff_chi(r_lo, g.cutoff_radius)};
    if (chi.hi == 0.0) continue;

    // Both the chi * dP term and the chi' * P term vanish outside the
    // cutoff support, where |x| <= 2R.  With a full-norm cutoff on an
    // orthonormal frame every ambient variable obeys |v_k| <= |x| there,
    // so the slot ranges may be clamped to the support before the
    // polynomial bounds are taken; otherwise the slope term scales with
    // the whole field box.
    if (g.norm_coords.empty()) {
      const double reach = 2.0 * g.cutoff_radius;
      for (Iv& s : slots) {
        s.lo = std::max(s.lo, -reach);
        s.hi = std::min(s.hi, reach);
        if (s.lo > s.hi) s.lo = s.hi = 0.0;
      }
    }

    std::vector<Iv> Jn(static_cast<std::size_t>(d) * d);
    for (std::size_t idx = 0; idx < n; ++idx)
      for (std::size_t k = 0; k < g.vars.size(); ++k) {
        const Iv dk = poly_partial_range(g.packed[idx],
                                         static_cast<int32_t>(k), slots);
        if (dk.lo == 0.0 && dk.hi == 0.0) continue;
        for (int32_t i = 0; i < d; ++i) {
          const double pi = g.proj[static_cast<std::size_t>(i) * n + idx];
          if (pi == 0.0) continue;
          for (int32_t j = 0; j < d; ++j) {
            const double rj = g.var_rows[k * static_cast<std::size_t>(d) + j];
            if (rj == 0.0) continue;
            auto& cell = Jn[static_cast<std::size_t>(i) * d + j];
            cell = iv_add(cell, iv_scale(dk, pi * rj));
          }
        }
      }
    for (std::size_t c = 0; c < Jn.size(); ++c)
      J[c] = iv_add(J[c], iv_mul(chi, Jn[c]));

    if (r_hi > g.cutoff_radius) {
      // |chi'| <= 1.5/R and |d r / d v_j| <= 1 on the norm coordinates
      std::vector<double> sup_p(n);
      for (std::size_t idx = 0; idx < n; ++idx)
        sup_p[idx] = iv_abs(poly_range(g.packed[idx], slots));
      const double slope = cutoff_slope_bound(g.cutoff_radius);
      for (int32_t i = 0; i < d; ++i) {
        double sup_n = 0.0;
        for (std::size_t idx = 0; idx < n; ++idx)
          sup_n += std::fabs(g.proj[static_cast<std::size_t>(i) * n + idx]) *
                   sup_p[idx];
        const double b = slope * sup_n;
        if (b == 0.0) continue;
        auto touch = [&](int32_t j) {
          auto& cell = J[static_cast<std::size_t>(i) * d + j];
          cell = iv_add(cell, Iv{-b, b});
        };
        if (g.norm_coords.empty())
          for (int32_t j = 0; j < d; ++j) touch(j);
        else
          for (int32_t j : g.norm_coords) touch(j);
      }
    }
  }
  return J;
}

// Fills derived evaluation data and certifies lip/norm bounds on the box.
void finalize(FiniteField& f) {
  const int32_t d = f.frame.dim;
  if (f.lin.size() != static_cast<std::size_t>(d) * d ||
      f.box_center.size() != static_cast<std::size_t>(d) ||
      f.box_half.size() != static_cast<std::size_t>(d))
    throw ValidationError("finite field dimensions are inconsistent");
  for (double h : f.box_half)
    if (!(h >= 0.0)) throw ValidationError("box half-widths must be nonnegative");

  for (auto& g : f.groups) {
    const std::size_t n = g.components.size();
    if (n == 0) throw ValidationError("empty cutoff group");
    if (!(g.cutoff_radius > 0.0))
      throw ValidationError("cutoff radius must be positive");
    if (g.proj.size() != static_cast<std::size_t>(d) * n)
      throw ValidationError("projection block has wrong shape");
    for (int32_t j : g.norm_coords)
      if (j < 0 || j >= d)
        throw ValidationError("norm coordinate outside the frame");

    g.vars.clear();
    for (const auto& [o, p] : g.components)
      for (int32_t v : p.variables()) g.vars.push_back(v);
    std::sort(g.vars.begin(), g.vars.end());
    g.vars.erase(std::unique(g.vars.begin(), g.vars.end()), g.vars.end());

    const std::size_t map_len =
        g.vars.empty() ? 0 : static_cast<std::size_t>(g.vars.back()) + 1;
    std::vector<int32_t> slot_of_var(map_len, -1);
    for (std::size_t k = 0; k < g.vars.size(); ++k)
      slot_of_var[static_cast<std::size_t>(g.vars[k])] =
          static_cast<int32_t>(k);

    g.var_rows.assign(g.vars.size() * static_cast<std::size_t>(d), 0.0);
    for (std::size_t k = 0; k < g.vars.size(); ++k) {
      const auto it = std::lower_bound(f.frame.support.begin(),
                                       f.frame.support.end(), g.vars[k]);
      if (it == f.frame.support.end() || *it != g.vars[k]) continue;
      const std::size_t r =
          static_cast<std::size_t>(it - f.frame.support.begin());
      for (int32_t j = 0; j < d; ++j)
        g.var_rows[k * static_cast<std::size_t>(d) + j] =
            f.frame.cols[r * static_cast<std::size_t>(d) + j];
    }

    g.packed.clear();
    for (const auto& [o, p] : g.components)
      g.packed.push_back(p.remapped(slot_of_var,
                                    static_cast<int32_t>(slot_of_var.size())));
  }

  const std::vector<Iv> J = jacobian_intervals(f);
  Eigen::MatrixXd B(d, d);
  for (int32_t i = 0; i < d; ++i)
    for (int32_t j = 0; j < d; ++j)
      B(i, j) = iv_abs(J[static_cast<std::size_t>(i) * d + j]);
  f.lip_bound = sigma_max(B);

  double r2 = 0.0;
  for (int32_t j = 0; j < d; ++j) {
    const double m = std::max(std::fabs(f.box_center[j] - f.box_half[j]),
                              std::fabs(f.box_center[j] + f.box_half[j]));
    r2 += m * m;
  }
  double norm = sigma_max(as_matrix(f.lin, d, d)) * std::sqrt(r2);
  for (const auto& g : f.groups) {
    const std::vector<Iv> slots = ambient_slots(f, g);
    double r_lo = 0.0, r_hi = 0.0;
    norm_range(f, g, &r_lo, &r_hi);
    const double chi_sup = cutoff_chi(r_lo, g.cutoff_radius);
    double s2 = 0.0;
    for (const auto& p : g.packed) {
      const double s = iv_abs(poly_range(p, slots));
      s2 += s * s;
    }
    norm += chi_sup *
            sigma_max(as_matrix(g.proj, d, static_cast<int>(g.packed.size()))) *
            std::sqrt(s2);
  }
  f.norm_bound = norm;
}

// Projection block of the poly components through a coefficient matrix
// whose column at each output index is supplied by `column`.  Components
// whose projection column vanishes are dropped.
CutGroup make_group(const StructuredCompactMap& Q, int32_t d,
                    const std::vector<std::vector<double>>& columns) {
  CutGroup g;
  g.cutoff_radius = Q.cutoff_radius;
  std::vector<std::size_t> kept;
  for (std::size_t idx = 0; idx < Q.components.size(); ++idx) {
    bool nz = false;
    for (double v : columns[idx])
      if (v != 0.0) nz = true;
    if (nz) kept.push_back(idx);
  }
  g.proj.assign(static_cast<std::size_t>(d) * kept.size(), 0.0);
  for (std::size_t c = 0; c < kept.size(); ++c) {
    g.components.push_back(Q.components[kept[c]]);
    for (int32_t i = 0; i < d; ++i)
      g.proj[static_cast<std::size_t>(i) * kept.size() + c] =
          columns[kept[c]][static_cast<std::size_t>(i)];
  }
  return g;
}

}  // namespace

void FiniteField::eval(std::span<const double> v, std::span<double> out,
                       Workspace& ws) const {
  const int32_t d = frame.dim;
  const auto& k = kernels::ops();
  k.matvec(lin.data(), v.data(), out.data(), static_cast<std::size_t>(d),
           static_cast<std::size_t>(d));
  for (const auto& g : groups) {
    const std::size_t n = g.packed.size();
    if (n == 0) continue;
    double r2;
    if (g.norm_coords.empty()) {
      r2 = k.sum_sq(v.data(), static_cast<std::size_t>(d));
    } else {
      ws.sub.resize(g.norm_coords.size());
      for (std::size_t i = 0; i < g.norm_coords.size(); ++i)
        ws.sub[i] = v[static_cast<std::size_t>(g.norm_coords[i])];
      r2 = k.sum_sq(ws.sub.data(), ws.sub.size());
    }
    const double chi = cutoff_chi(std::sqrt(r2), g.cutoff_radius);
    if (chi == 0.0) continue;
    ws.vals.resize(g.vars.size());
    for (std::size_t kk = 0; kk < g.vars.size(); ++kk)
      ws.vals[kk] = k.dot(g.var_rows.data() + kk * static_cast<std::size_t>(d),
                          v.data(), static_cast<std::size_t>(d));
    for (std::size_t idx = 0; idx < n; ++idx) {
      const double w = chi * g.packed[idx].eval_packed(ws.vals);
      if (w == 0.0) continue;
      for (int32_t i = 0; i < d; ++i)
        out[static_cast<std::size_t>(i)] +=
            g.proj[static_cast<std::size_t>(i) * n + idx] * w;
    }
  }
}

bool FiniteField::in_box(std::span<const double> v, double slack) const {
  for (int32_t j = 0; j < frame.dim; ++j)
    if (std::fabs(v[static_cast<std::size_t>(j)] - box_center[j]) >
        box_half[j] + slack)
      return false;
  return true;
}

FiniteField compress_field(const PermissibleField& F, const Frame& V,
                           std::vector<double> box_center,
                           std::vector<double> box_half) {
  FiniteField f;
  f.frame = V;
  f.box_center = std::move(box_center);
  f.box_half = std::move(box_half);

  const std::vector<int32_t> u =
      window_union(F.L, V.support, F.Q.linear_block_dim);
  const Eigen::MatrixXd M = dense_window(F.L, u) + dense_q_linear(F.Q, u);
  const Eigen::MatrixXd C = embed_columns(V, u);
  f.lin = as_vector(C.transpose() * M * C);

  if (!F.Q.components.empty()) {
    std::vector<std::vector<double>> columns;
    for (const auto& [o, p] : F.Q.components) {
      std::vector<double> col(static_cast<std::size_t>(V.dim), 0.0);
      const auto it =
          std::lower_bound(V.support.begin(), V.support.end(), o);
      if (it != V.support.end() && *it == o) {
        const std::size_t r = static_cast<std::size_t>(it - V.support.begin());
        for (int32_t j = 0; j < V.dim; ++j)
          col[static_cast<std::size_t>(j)] =
              V.cols[r * static_cast<std::size_t>(V.dim) + j];
      }
      columns.push_back(std::move(col));
    }
    CutGroup g = make_group(F.Q, V.dim, columns);
    if (!g.components.empty()) f.groups.push_back(std::move(g));
  }
  finalize(f);
  return f;
}

FiniteField intermediate_field(const PermissibleField& F, const Frame& V,
                               const Frame& W, std::vector<double> box_center,
                               std::vector<double> box_half) {
  if (!W.contains(V))
    throw ValidationError("intermediate field requires V contained in W");
  FiniteField f;
  f.frame = W;
  f.box_center = std::move(box_center);
  f.box_half = std::move(box_half);

  std::vector<int32_t> extra = W.support;
  extra.insert(extra.end(), V.support.begin(), V.support.end());
  const std::vector<int32_t> u =
      window_union(F.L, extra, F.Q.linear_block_dim);
  const Eigen::MatrixXd Lu = dense_window(F.L, u);
  const Eigen::MatrixXd Qu = dense_q_linear(F.Q, u);
  const Eigen::MatrixXd CW = embed_columns(W, u);
  const Eigen::MatrixXd CV = embed_columns(V, u);
  const Eigen::MatrixXd E = CW.transpose() * CV;          // dW x dV
  const Eigen::MatrixXd MLW = CW.transpose() * Lu * CW;   // dW x dW
  const Eigen::MatrixXd MLV = CV.transpose() * Lu * CV;   // dV x dV
  const Eigen::MatrixXd Mx = CV.transpose() * Lu * CW;    // dV x dW

  // pi_V L pi_V + pi_U L pi_U with pi_U = pi_W - pi_V, in W coordinates,
  // plus pi_V applied to the compact linear part of Q.
  Eigen::MatrixXd lin = MLW - E * Mx - Mx.transpose() * E.transpose() +
                        2.0 * (E * MLV * E.transpose());
  lin += E * (CV.transpose() * Qu * CW);
  f.lin = as_vector(lin);

  if (!F.Q.components.empty()) {
    std::vector<std::vector<double>> columns;
    for (const auto& [o, p] : F.Q.components) {
      // pi_V e_o in W coordinates: E * (row of V at o)
      Eigen::VectorXd vo = Eigen::VectorXd::Zero(V.dim);
      const auto it = std::lower_bound(V.support.begin(), V.support.end(), o);
      if (it != V.support.end() && *it == o) {
        const std::size_t r = static_cast<std::size_t>(it - V.support.begin());
        for (int32_t j = 0; j < V.dim; ++j)
          vo(j) = V.cols[r * static_cast<std::size_t>(V.dim) + j];
      }
      const Eigen::VectorXd wo = E * vo;
      std::vector<double> col(static_cast<std::size_t>(W.dim));
      for (int32_t j = 0; j < W.dim; ++j)
        col[static_cast<std::size_t>(j)] = wo(j);
      columns.push_back(std::move(col));
    }
    CutGroup g = make_group(F.Q, W.dim, columns);
    if (!g.components.empty()) f.groups.push_back(std::move(g));
  }
  finalize(f);
  return f;
}

namespace {

bool poly_equal(const Poly& a, const Poly& b) {
  if (a.terms.size() != b.terms.size()) return false;
  for (std::size_t i = 0; i < a.terms.size(); ++i)
    if (a.terms[i].coeff != b.terms[i].coeff ||
        a.terms[i].factors != b.terms[i].factors)
      return false;
  return true;
}

bool same_poly_part(const StructuredCompactMap& a,
                    const StructuredCompactMap& b) {
  if (a.components.size() != b.components.size()) return false;
  if (!a.components.empty() && a.cutoff_radius != b.cutoff_radius) return false;
  for (std::size_t i = 0; i < a.components.size(); ++i)
    if (a.components[i].first != b.components[i].first ||
        !poly_equal(a.components[i].second, b.components[i].second))
      return false;
  return true;
}

}  // namespace

double decomposition_pseudometric(const PermissibleField& a,
                                  const PermissibleField& b, double r_x) {
  if (!(r_x > 0.0)) throw ValidationError("ball radius must be positive");

  // ||L_a - L_b||: dense on the union core window, diagonal tail beyond.
  const int32_t m = std::max(a.L.core_dim, b.L.core_dim);
  std::vector<int32_t> head(static_cast<std::size_t>(m));
  for (int32_t i = 0; i < m; ++i) head[static_cast<std::size_t>(i)] = i;
  const std::vector<int32_t> u = window_union(a.L, head);
  const Eigen::MatrixXd D = dense_window(a.L, u) - dense_window(b.L, u);
  double norm_l = 0.0;
  if (u.size() > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D,
                                                      Eigen::EigenvaluesOnly);
    norm_l = std::max(std::fabs(es.eigenvalues()(0)),
                      std::fabs(es.eigenvalues()(static_cast<int>(u.size()) - 1)));
  }
  const auto base = [](const SpectralOperator& L, bool even) {
    return L.single_tail ? L.tail_plus : (even ? L.tail_plus : L.tail_minus);
  };
  const double base_diff =
      std::max(std::fabs(base(a.L, true) - base(b.L, true)),
               std::fabs(base(a.L, false) - base(b.L, false)));
  const DecayRule mod_diff = a.L.tail_modifier.plus(b.L.tail_modifier, -1.0);
  const int32_t beyond = u.empty() ? 0 : u.back() + 1;
  norm_l = std::max(norm_l, base_diff + mod_diff.tail_sup(beyond));

  // sup over the ball of ||(Q_a - Q_b) x||: identical poly parts cancel.
  double poly_diff = 0.0;
  if (!same_poly_part(a.Q, b.Q))
    poly_diff = a.Q.poly_sup_ball(r_x) + b.Q.poly_sup_ball(r_x);
  const int32_t bd = std::max(a.Q.linear_block_dim, b.Q.linear_block_dim);
  std::vector<int32_t> bhead(static_cast<std::size_t>(bd));
  for (int32_t i = 0; i < bd; ++i) bhead[static_cast<std::size_t>(i)] = i;
  StructuredCompactMap qdiff;
  qdiff.linear_block_dim = bd;
  qdiff.linear_block.assign(static_cast<std::size_t>(bd) * bd, 0.0);
  for (int32_t i = 0; i < a.Q.linear_block_dim; ++i)
    for (int32_t j = 0; j < a.Q.linear_block_dim; ++j)
      qdiff.linear_block[static_cast<std::size_t>(i) * bd + j] +=
          a.Q.linear_block[static_cast<std::size_t>(i) * a.Q.linear_block_dim +
                           j];
  for (int32_t i = 0; i < b.Q.linear_block_dim; ++i)
    for (int32_t j = 0; j < b.Q.linear_block_dim; ++j)
      qdiff.linear_block[static_cast<std::size_t>(i) * bd + j] -=
          b.Q.linear_block[static_cast<std::size_t>(i) * b.Q.linear_block_dim +
                           j];
  qdiff.diagonal_compact = a.Q.diagonal_compact.plus(b.Q.diagonal_compact, -1.0);
  const double lin_diff = qdiff.linear_norm_upper();

  return norm_l + poly_diff + lin_diff * r_x;
}

namespace {

// One classical RK4 step of v' = -f(v).
void rk4_once(const FiniteField& f, Workspace& ws,
              std::span<const double> vin, double h, std::vector<double>& out) {
  const std::size_t d = static_cast<std::size_t>(f.dim());
  const auto& k = kernels::ops();
  auto deriv = [&](std::span<const double> x, std::vector<double>& kd) {
    f.eval(x, kd, ws);
    k.scale(-1.0, kd.data(), d);
  };
  deriv(vin, ws.k1);
  k.axpby_to(ws.st.data(), vin.data(), 0.5 * h, ws.k1.data(), d);
  deriv(ws.st, ws.k2);
  k.axpby_to(ws.st.data(), vin.data(), 0.5 * h, ws.k2.data(), d);
  deriv(ws.st, ws.k3);
  k.axpby_to(ws.st.data(), vin.data(), h, ws.k3.data(), d);
  deriv(ws.st, ws.k4);
  k.rk4_combine(out.data(), vin.data(), ws.k1.data(), ws.k2.data(),
                ws.k3.data(), ws.k4.data(), h, d);
}

}  // namespace

FlowStep time_tau_map(const FiniteField& f, std::span<const double> x,
                      double tau, double tol) {
  const std::size_t d = static_cast<std::size_t>(f.dim());
  if (x.size() != d) throw ValidationError("start point has wrong dimension");
  if (!(tau > 0.0)) throw ValidationError("flow time must be positive");
  if (!(tol > 0.0)) throw ValidationError("flow tolerance must be positive");
  if (!f.in_box(x, 1e-12))
    throw ValidationError("start point outside the stated box");

  Workspace ws;
  for (auto* b : {&ws.k1, &ws.k2, &ws.k3, &ws.k4, &ws.st, &ws.y1, &ws.yh,
                  &ws.y2, &ws.diff})
    b->assign(d, 0.0);
  std::vector<double> v(x.begin(), x.end());
  const auto& k = kernels::ops();

  double t = 0.0, acc = 0.0, h = tau;
  const double h_min = tau * 1e-13;
  long iters = 0;
  while (tau - t > tau * 1e-15) {
    if (++iters > 2000000)
      throw Error("flow integration exceeded the step budget");
    h = std::min(h, tau - t);
    rk4_once(f, ws, v, h, ws.y1);
    rk4_once(f, ws, v, 0.5 * h, ws.yh);
    rk4_once(f, ws, ws.yh, 0.5 * h, ws.y2);
    k.axpby_to(ws.diff.data(), ws.y1.data(), -1.0, ws.y2.data(), d);
    const double est = std::sqrt(k.sum_sq(ws.diff.data(), d)) / 15.0;
    const double tol_step = tol * (h / tau);
    if (est <= tol_step || h <= h_min) {
      if (!f.in_box(ws.yh))
        throw BoxExitError("trajectory left the stated box", t, t + 0.5 * h);
      if (!f.in_box(ws.y2))
        throw BoxExitError("trajectory left the stated box", t + 0.5 * h,
                           t + h);
      v = ws.y2;
      t += h;
      acc += est;
      const double fac =
          est > 0.0 ? std::clamp(0.9 * std::pow(tol_step / est, 0.2), 0.2, 4.0)
                    : 4.0;
      h *= fac;
    } else {
      h *= std::clamp(0.9 * std::pow(tol_step / est, 0.2), 0.1, 0.9);
      if (h < h_min) h = h_min;
    }
  }

  FlowStep fs;
  fs.start.assign(x.begin(), x.end());
  fs.tau = tau;
  fs.end = std::move(v);
  fs.r_enc = acc * std::exp(f.lip_bound * tau);
  return fs;
}

FiniteField homotopy_family(const FiniteField& a, const FiniteField& b,
                            double s) {
  if (!(s >= 0.0 && s <= 1.0))
    throw ValidationError("homotopy parameter must lie in [0, 1]");
  if (a.frame.support != b.frame.support || a.frame.dim != b.frame.dim ||
      a.frame.cols != b.frame.cols)
    throw ValidationError("homotopy endpoints must share a frame");
  if (a.box_center != b.box_center || a.box_half != b.box_half)
    throw ValidationError("homotopy endpoints must share a box");
  if (s == 0.0) return a;
  if (s == 1.0) return b;

  FiniteField f;
  f.frame = a.frame;
  f.box_center = a.box_center;
  f.box_half = a.box_half;
  f.lin.resize(a.lin.size());
  for (std::size_t i = 0; i < a.lin.size(); ++i)
    f.lin[i] = (1.0 - s) * a.lin[i] + s * b.lin[i];
  auto add_groups = [&](const FiniteField& src, double w) {
    for (CutGroup g : src.groups) {
      for (double& p : g.proj) p *= w;
      f.groups.push_back(std::move(g));
    }
  };
  add_groups(a, 1.0 - s);
  add_groups(b, s);
  finalize(f);
  f.lip_bound = (1.0 - s) * a.lip_bound + s * b.lip_bound;
  f.norm_bound = (1.0 - s) * a.norm_bound + s * b.norm_bound;
  return f;
}

FiniteField product_field(const FiniteField& a, const FiniteField& b) {
  {
    std::vector<int32_t> inter;
    std::set_intersection(a.frame.support.begin(), a.frame.support.end(),
                          b.frame.support.begin(), b.frame.support.end(),
                          std::back_inserter(inter));
    if (!inter.empty())
      throw ValidationError("product factors must have disjoint supports");
  }
  const int32_t d1 = a.frame.dim, d2 = b.frame.dim, d = d1 + d2;

  std::vector<int32_t> support = a.frame.support;
  support.insert(support.end(), b.frame.support.begin(),
                 b.frame.support.end());
  std::sort(support.begin(), support.end());
  std::vector<double> cols(support.size() * static_cast<std::size_t>(d), 0.0);
  auto place = [&](const Frame& fr, int32_t col_off) {
    for (std::size_t r = 0; r < fr.support.size(); ++r) {
      const auto it = std::lower_bound(support.begin(), support.end(),
                                       fr.support[r]);
      const std::size_t row = static_cast<std::size_t>(it - support.begin());
      for (int32_t j = 0; j < fr.dim; ++j)
        cols[row * static_cast<std::size_t>(d) + col_off + j] =
            fr.cols[r * static_cast<std::size_t>(fr.dim) + j];
    }
  };
  place(a.frame, 0);
  place(b.frame, d1);

  FiniteField f;
  f.frame = Frame::from_columns(std::move(support), std::move(cols), d);
  f.lin.assign(static_cast<std::size_t>(d) * d, 0.0);
  for (int32_t i = 0; i < d1; ++i)
    for (int32_t j = 0; j < d1; ++j)
      f.lin[static_cast<std::size_t>(i) * d + j] =
          a.lin[static_cast<std::size_t>(i) * d1 + j];
  for (int32_t i = 0; i < d2; ++i)
    for (int32_t j = 0; j < d2; ++j)
      f.lin[static_cast<std::size_t>(i + d1) * d + (j + d1)] =
          b.lin[static_cast<std::size_t>(i) * d2 + j];

  auto add_groups = [&](const FiniteField& src, int32_t off, int32_t src_d) {
    for (const CutGroup& g0 : src.groups) {
      CutGroup g;
      g.cutoff_radius = g0.cutoff_radius;
      g.components = g0.components;
      if (g0.norm_coords.empty())
        for (int32_t j = 0; j < src_d; ++j) g.norm_coords.push_back(off + j);
      else
        for (int32_t j : g0.norm_coords) g.norm_coords.push_back(off + j);
      const std::size_t n = g0.components.size();
      g.proj.assign(static_cast<std::size_t>(d) * n, 0.0);
      for (int32_t i = 0; i < src_d; ++i)
        for (std::size_t c = 0; c < n; ++c)
          g.proj[static_cast<std::size_t>(i + off) * n + c] =
              g0.proj[static_cast<std::size_t>(i) * n + c];
      f.groups.push_back(std::move(g));
    }
  };
  add_groups(a, 0, d1);
  add_groups(b, d1, d2);

  f.box_center = a.box_center;
  f.box_center.insert(f.box_center.end(), b.box_center.begin(),
                      b.box_center.end());
  f.box_half = a.box_half;
  f.box_half.insert(f.box_half.end(), b.box_half.begin(), b.box_half.end());
  finalize(f);
  // block-decoupled field: bounds combine exactly
  f.lip_bound = std::max(a.lip_bound, b.lip_bound);
  f.norm_bound = std::hypot(a.norm_bound, b.norm_bound);
  return f;
}

std::vector<double> comparison_matrix(const FiniteField& f) {
  const int32_t d = f.frame.dim;
  const std::vector<Iv> J = jacobian_intervals(f);
  std::vector<double> G(static_cast<std::size_t>(d) * d);
  for (int32_t i = 0; i < d; ++i)
    for (int32_t j = 0; j < d; ++j) {
      const Iv& c = J[static_cast<std::size_t>(i) * d + j];
      G[static_cast<std::size_t>(i) * d + j] = (i == j) ? -c.lo : iv_abs(c);
    }
  return G;
}

std::vector<double> mat_exp(const std::vector<double>& m, int32_t d,
                            double t) {
  const std::size_t n = static_cast<std::size_t>(d);
  if (m.size() != n * n) throw ValidationError("matrix has wrong shape");
  std::vector<double> a(n * n);
  for (std::size_t i = 0; i < n * n; ++i) a[i] = t * m[i];

  double norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += std::fabs(a[i * n + j]);
    norm = std::max(norm, row);
  }
  int squarings = 0;
  while (norm > 0.25) {
    norm *= 0.5;
    ++squarings;
  }
  const double scale = std::ldexp(1.0, -squarings);
  for (double& v : a) v *= scale;

  auto matmul = [&](const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> r(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) {
        const double xv = x[i * n + k];
        if (xv == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) r[i * n + j] += xv * y[k * n + j];
      }
    return r;
  };

  std::vector<double> r(n * n, 0.0), term(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) r[i * n + i] = term[i * n + i] = 1.0;
  for (int kk = 1; kk <= 40; ++kk) {
    term = matmul(term, a);
    const double inv = 1.0 / kk;
    double tn = 0.0;
    for (std::size_t i = 0; i < n * n; ++i) {
      term[i] *= inv;
      r[i] += term[i];
      tn = std::max(tn, std::fabs(term[i]));
    }
    if (tn < 1e-19) break;
  }
  for (int sq = 0; sq < squarings; ++sq) r = matmul(r, r);
  return r;
}

}  // namespace conley
