#pragma once

#include <cstdint>
#include <vector>

namespace conley {

// Closed-form decaying diagonal sequences.  A rule is a sum of primitive
// terms, each positive and strictly decreasing in the coordinate number
// k = index + 1:
//   geometric: coeff * q^k        (0 < q < 1)
//   power:     coeff / k^p        (p > 0)
// Sums of terms keep tail suprema computable: sup_{j >= i} |value(j)| is
// bounded by the triangle inequality term by term, which is exact for
// single-term rules.  Rules combine linearly and identical primitives merge
// coefficients, so subtracting a rule from itself yields the exact zero rule.
struct DecayTerm {
  enum class Kind { Geometric, Power };
  Kind kind;
  double coeff;
  double param;

  bool operator==(const DecayTerm&) const = default;
};

struct DecayRule {
  std::vector<DecayTerm> terms;

  static DecayRule geometric(double coeff, double q);
  static DecayRule power(double coeff, double p);

  bool is_zero() const { return terms.empty(); }
  double value(int32_t index) const;     // index is 0-based
  double tail_sup(int32_t index) const;  // >= sup_{j >= index} |value(j)|
  double sup_all() const { return tail_sup(0); }

  DecayRule plus(const DecayRule& o, double scale = 1.0) const;
  DecayRule scaled(double s) const;

  bool operator==(const DecayRule&) const = default;
};

}  // namespace conley
