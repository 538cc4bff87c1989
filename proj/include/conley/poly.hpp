#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "conley/vec.hpp"

namespace conley {

// Multivariate polynomial in ambient coordinates, stored as a canonical
// term list: factors sorted by variable, terms sorted lexicographically by
// factor list, like terms merged.  Canonical form makes subtraction cancel
// exactly, which the decomposition pseudometric relies on.
struct Monomial {
  double coeff = 0.0;
  // (variable index, power), power >= 1, sorted by variable
  std::vector<std::pair<int32_t, int32_t>> factors;
  int32_t degree() const;

  bool operator==(const Monomial&) const = default;
};

struct Poly {
  std::vector<Monomial> terms;

  static Poly constant(double c);
  static Poly linear(int32_t var, double c);

  void add_term(Monomial m);  // merges into canonical form
  Poly plus(const Poly& o, double scale = 1.0) const;
  bool is_zero() const { return terms.empty(); }

  double eval(const Vec& x) const;
  // Evaluation against a packed value array: factors must have been
  // remapped to slot indices first.
  double eval_packed(std::span<const double> slot_values) const;
  Poly remapped(std::span<const int32_t> slot_of_var, int32_t n_vars) const;

  std::vector<int32_t> variables() const;
  int32_t max_degree() const;
  // sup over the closed ball of radius r of |p|, via sum_m |c_m| r^deg(m)
  double sup_ball(double r) const;
  // sup over the ball of radius r of |d p / d x_var|
  double partial_sup_ball(int32_t var, double r) const;
  // sup of |dp/dx_var| over the box |x_i| <= ext[i] (variables outside the
  // extent list are treated as bounded by fallback)
  double partial_sup_box(int32_t var, std::span<const double> ext,
                         std::span<const int32_t> ext_vars,
                         double fallback) const;

  bool operator==(const Poly&) const = default;
};

}  // namespace conley
