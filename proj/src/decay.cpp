#include "conley/decay.hpp"

#include <cmath>

#include "conley/errors.hpp"

namespace conley {

namespace {
double term_base(const DecayTerm& t, int32_t index) {
  const double k = static_cast<double>(index) + 1.0;
  switch (t.kind) {
    case DecayTerm::Kind::Geometric:
      return std::pow(t.param, k);
    case DecayTerm::Kind::Power:
      return std::pow(k, -t.param);
  }
  return 0.0;
}
}  // namespace

DecayRule DecayRule::geometric(double coeff, double q) {
  if (!(q > 0.0 && q < 1.0))
    throw ValidationError("geometric decay ratio must lie in (0,1)");
  DecayRule r;
  if (coeff != 0.0) r.terms.push_back({DecayTerm::Kind::Geometric, coeff, q});
  return r;
}

DecayRule DecayRule::power(double coeff, double p) {
  if (!(p > 0.0)) throw ValidationError("power decay exponent must be > 0");
  DecayRule r;
  if (coeff != 0.0) r.terms.push_back({DecayTerm::Kind::Power, coeff, p});
  return r;
}

double DecayRule::value(int32_t index) const {
  double s = 0.0;
  for (const auto& t : terms) s += t.coeff * term_base(t, index);
  return s;
}

double DecayRule::tail_sup(int32_t index) const {
  double s = 0.0;
  for (const auto& t : terms) s += std::fabs(t.coeff) * term_base(t, index);
  return s;
}

DecayRule DecayRule::plus(const DecayRule& o, double scale) const {
  DecayRule r = *this;
  for (const auto& t : o.terms) {
    bool merged = false;
    for (auto& u : r.terms) {
      if (u.kind == t.kind && u.param == t.param) {
        u.coeff += scale * t.coeff;
        merged = true;
        break;
      }
    }
    if (!merged) r.terms.push_back({t.kind, scale * t.coeff, t.param});
  }
  std::erase_if(r.terms, [](const DecayTerm& t) { return t.coeff == 0.0; });
  return r;
}

DecayRule DecayRule::scaled(double s) const {
  DecayRule r;
  if (s == 0.0) return r;
  r.terms = terms;
  for (auto& t : r.terms) t.coeff *= s;
  return r;
}

}  // namespace conley
