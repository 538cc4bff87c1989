#include "conley/poly.hpp"

#include <algorithm>
#include <cmath>

#include "conley/errors.hpp"

namespace conley {

int32_t Monomial::degree() const {
  int32_t d = 0;
  for (const auto& [v, p] : factors) d += p;
  return d;
}

Poly Poly::constant(double c) {
  Poly p;
  Monomial m;
  m.coeff = c;
  p.add_term(std::move(m));
  return p;
}

Poly Poly::linear(int32_t var, double c) {
  Poly p;
  Monomial m;
  m.coeff = c;
  m.factors = {{var, 1}};
  p.add_term(std::move(m));
  return p;
}

void Poly::add_term(Monomial m) {
  if (m.coeff == 0.0) return;
  std::sort(m.factors.begin(), m.factors.end());
  for (const auto& [v, p] : m.factors)
    if (p < 1) throw ValidationError("monomial powers must be >= 1");
  auto cmp = [](const Monomial& a, const Monomial& b) {
    return a.factors < b.factors;
  };
  auto it = std::lower_bound(terms.begin(), terms.end(), m, cmp);
  if (it != terms.end() && it->factors == m.factors) {
    it->coeff += m.coeff;
    if (it->coeff == 0.0) terms.erase(it);
  } else {
    terms.insert(it, std::move(m));
  }
}

Poly Poly::plus(const Poly& o, double scale) const {
  Poly r = *this;
  for (const auto& t : o.terms) {
    Monomial m = t;
    m.coeff *= scale;
    r.add_term(std::move(m));
  }
  return r;
}

namespace {
double ipow(double x, int32_t p) {
  double r = 1.0;
  for (int32_t i = 0; i < p; ++i) r *= x;
  return r;
}
}  // namespace

double Poly::eval(const Vec& x) const {
  double s = 0.0;
  for (const auto& t : terms) {
    double v = t.coeff;
    for (const auto& [var, pow] : t.factors) v *= ipow(x.at(var), pow);
    s += v;
  }
  return s;
}

double Poly::eval_packed(std::span<const double> slot_values) const {
  double s = 0.0;
  for (const auto& t : terms) {
    double v = t.coeff;
    for (const auto& [slot, pow] : t.factors) v *= ipow(slot_values[slot], pow);
    s += v;
  }
  return s;
}

Poly Poly::remapped(std::span<const int32_t> slot_of_var, int32_t n_vars) const {
  Poly r;
  r.terms = terms;
  for (auto& t : r.terms)
    for (auto& [var, pow] : t.factors) {
      if (var >= n_vars || slot_of_var[var] < 0)
        throw ValidationError("polynomial variable outside the input support");
      var = slot_of_var[var];
    }
  return r;
}

std::vector<int32_t> Poly::variables() const {
  std::vector<int32_t> vs;
  for (const auto& t : terms)
    for (const auto& [v, p] : t.factors) vs.push_back(v);
  std::sort(vs.begin(), vs.end());
  vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
  return vs;
}

int32_t Poly::max_degree() const {
  int32_t d = 0;
  for (const auto& t : terms) d = std::max(d, t.degree());
  return d;
}

double Poly::sup_ball(double r) const {
  double s = 0.0;
  for (const auto& t : terms) s += std::fabs(t.coeff) * ipow(r, t.degree());
  return s;
}

double Poly::partial_sup_ball(int32_t var, double r) const {
  double s = 0.0;
  for (const auto& t : terms)
    for (const auto& [v, p] : t.factors)
      if (v == var)
        s += std::fabs(t.coeff) * static_cast<double>(p) * ipow(r, t.degree() - 1);
  return s;
}

double Poly::partial_sup_box(int32_t var, std::span<const double> ext,
                             std::span<const int32_t> ext_vars,
                             double fallback) const {
  auto extent_of = [&](int32_t v) {
    for (std::size_t i = 0; i < ext_vars.size(); ++i)
      if (ext_vars[i] == v) return ext[i];
    return fallback;
  };
  double s = 0.0;
  for (const auto& t : terms) {
    for (const auto& [v, p] : t.factors) {
      if (v != var) continue;
      double b = std::fabs(t.coeff) * static_cast<double>(p);
      for (const auto& [w, q] : t.factors)
        b *= ipow(extent_of(w), w == v ? q - 1 : q);
      s += b;
    }
  }
  return s;
}

}  // namespace conley
